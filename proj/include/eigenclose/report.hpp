#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "eigenclose/bounds.hpp"

namespace eigenclose {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
  DomainKind domain = DomainKind::UnitSquare;
  ElementKind nc_kind = ElementKind::EQ1Rot;
  bool post_lowest = true;
  bool post_higher = true;
  std::vector<int> levels;  // strictly increasing subdivision counts
  int m = 6;
  double tol = 1e-10;
  std::uint64_t seed = 42;

  ElementKind lowest_kind() const {
    return nc_kind == ElementKind::ECR ? ElementKind::P1 : ElementKind::Q1;
  }
  ElementKind higher_kind() const {
    return nc_kind == ElementKind::ECR ? ElementKind::P2 : ElementKind::Q2;
  }
  CellKind cell_kind() const {
    return nc_kind == ElementKind::ECR ? CellKind::Triangle : CellKind::Rectangle;
  }

  void validate() const {
    if (m < 1) throw std::invalid_argument("config: m must be >= 1");
    if (levels.empty()) throw std::invalid_argument("config: levels must be nonempty");
    for (size_t i = 1; i < levels.size(); ++i)
      if (levels[i] <= levels[i - 1])
        throw std::invalid_argument("config: levels must be strictly increasing");
  }
};

struct LevelResult {
  int n = 0;
  double h = 0.0;
  bool failed = false;
  std::string error;
  std::vector<double> lower;         // j-ordered nonconforming eigenvalues
  std::vector<double> upper_lowest;  // empty when not computed
  std::vector<double> upper_higher;
  EnclosureReport enclosure;
};

/// Least-squares slope of log(error) against log(h). Nonpositive errors are
/// excluded; absent when fewer than two usable points remain.
inline std::optional<double> fit_rate(const std::vector<double>& errors,
                                      const std::vector<double>& hs) {
  std::vector<double> le, lh;
  for (size_t i = 0; i < errors.size() && i < hs.size(); ++i) {
    if (errors[i] > 0.0 && hs[i] > 0.0) {
      le.push_back(std::log(errors[i]));
      lh.push_back(std::log(hs[i]));
    }
  }
  if (le.size() < 2) return std::nullopt;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < le.size(); ++i) {
    sx += lh[i];
    sy += le[i];
    sxx += lh[i] * lh[i];
    sxy += lh[i] * le[i];
  }
  const double nn = static_cast<double>(le.size());
  const double denom = nn * sxx - sx * sx;
  if (denom == 0.0) return std::nullopt;
  return (nn * sxy - sx * sy) / denom;
}

/// Per-eigenvalue errors against a reference spectrum, with the rate between
/// consecutive levels and the overall least-squares rate.
struct RateTable {
  std::string quantity;  // "lower", "upper_lowest", "upper_higher"
  std::vector<double> hs;
  std::vector<std::vector<double>> errors;   // [j][level], signed reference gap
  std::vector<std::vector<double>> stepwise; // [j][level-1] rates, NaN when undefined
  std::vector<std::optional<double>> fitted; // [j]
};

struct ErrSeries {
  std::string name;  // Err1 / Err2 / Err3, as in the convergence figures
  std::string description;
  std::vector<double> hs;
  std::vector<double> values;
  std::optional<double> fitted_rate;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<LevelResult> levels;
  std::vector<double> reference;      // exact (square) or extrapolated (L-shape)
  bool reference_certified = false;   // true only for the known square spectrum
  std::vector<RateTable> rate_tables;
  std::vector<ErrSeries> err_series;
  bool any_inversion = false;
  bool any_failure = false;
};

namespace detail {

// Aitken extrapolation of the last three values of a sequence.
inline std::optional<double> aitken_limit(const std::vector<double>& v) {
  if (v.size() < 3) return std::nullopt;
  const double a = v[v.size() - 3], b = v[v.size() - 2], c = v[v.size() - 1];
  const double denom = c - 2.0 * b + a;
  if (denom == 0.0) return std::nullopt;
  return (c * a - b * b) / denom;
}

inline RateTable make_rate_table(const std::string& quantity, bool upper,
                                 const std::vector<double>& hs,
                                 const std::vector<std::vector<double>>& values,
                                 const std::vector<double>& reference) {
  RateTable table;
  table.quantity = quantity;
  table.hs = hs;
  const size_t m = reference.size();
  table.errors.assign(m, {});
  table.stepwise.assign(m, {});
  table.fitted.assign(m, std::nullopt);
  for (size_t j = 0; j < m; ++j) {
    std::vector<double> err;
    for (const auto& level : values) {
      if (j < level.size())
        err.push_back(upper ? level[j] - reference[j] : reference[j] - level[j]);
      else
        err.push_back(std::nan(""));
    }
    table.errors[j] = err;
    for (size_t k = 0; k + 1 < err.size(); ++k) {
      const bool ok = err[k] > 0.0 && err[k + 1] > 0.0 && hs[k] > hs[k + 1];
      table.stepwise[j].push_back(
          ok ? std::log(err[k] / err[k + 1]) / std::log(hs[k] / hs[k + 1]) : std::nan(""));
    }
    std::vector<double> clean;
    std::vector<double> ch;
    for (size_t k = 0; k < err.size(); ++k)
      if (std::isfinite(err[k])) {
        clean.push_back(err[k]);
        ch.push_back(hs[k]);
      }
    table.fitted[j] = fit_rate(clean, ch);
  }
  return table;
}

}  // namespace detail

/// Runs the element x domain x refinement sweep. A failing level is recorded
/// and the remaining levels still run.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  result.config = config;

  for (int n : config.levels) {
    LevelResult level;
    level.n = n;
    try {
      const Mesh mesh = build_mesh(config.domain, config.cell_kind(), n);
      level.h = mesh.h;
      const LowerBoundResult lower = lower_bounds(mesh, config.nc_kind, config.m,
                                                  config.tol, config.seed);
      std::optional<UpperBoundResult> lowest, higher;
      if (config.post_lowest) lowest = upper_bound_lowest(lower, config.lowest_kind());
      if (config.post_higher) higher = upper_bound_higher(lower, config.higher_kind(), config.m);

      for (int j = 0; j < config.m; ++j) level.lower.push_back(lower.value(j));
      if (lowest)
        for (int j = 0; j < lowest->values.size(); ++j)
          level.upper_lowest.push_back(lowest->values(j));
      if (higher)
        for (int j = 0; j < higher->values.size(); ++j)
          level.upper_higher.push_back(higher->values(j));

      level.enclosure = enclosure(lower, lowest ? &*lowest : nullptr, higher ? &*higher : nullptr);
      level.enclosure.n = n;
      level.enclosure.solver_tol = config.tol;
      level.enclosure.seed = config.seed;
      result.any_inversion = result.any_inversion || level.enclosure.any_inversion;
    } catch (const std::exception& e) {
      level.failed = true;
      level.error = e.what();
      result.any_failure = true;
    }
    result.levels.push_back(std::move(level));
  }

  // reference spectrum: exact on the square; Aitken-extrapolated from the
  // sharpest computed sequence on the L-shape (rate estimation only, not
  // certified)
  if (config.domain == DomainKind::UnitSquare) {
    for (const ExactSolution& s : exact_solutions(config.domain, config.m))
      result.reference.push_back(s.eigenvalue);
    result.reference_certified = true;
  } else {
    for (int j = 0; j < config.m; ++j) {
      std::vector<double> seq;
      for (const LevelResult& level : result.levels) {
        const auto& src = !level.upper_higher.empty() ? level.upper_higher
                          : !level.upper_lowest.empty() ? level.upper_lowest
                                                        : level.lower;
        if (!level.failed && j < static_cast<int>(src.size()))
          seq.push_back(src[static_cast<size_t>(j)]);
      }
      const auto limit = detail::aitken_limit(seq);
      result.reference.push_back(limit ? *limit : std::nan(""));
    }
  }

  std::vector<double> hs;
  std::vector<std::vector<double>> lows, uplows, uphighs;
  for (const LevelResult& level : result.levels) {
    if (level.failed) continue;
    hs.push_back(level.h);
    lows.push_back(level.lower);
    uplows.push_back(level.upper_lowest);
    uphighs.push_back(level.upper_higher);
  }
  const bool have_ref = !result.reference.empty() &&
                        std::isfinite(result.reference[0]);
  if (have_ref && !hs.empty()) {
    result.rate_tables.push_back(detail::make_rate_table("lower", false, hs, lows, result.reference));
    if (config.post_lowest)
      result.rate_tables.push_back(
          detail::make_rate_table("upper_lowest", true, hs, uplows, result.reference));
    if (config.post_higher)
      result.rate_tables.push_back(
          detail::make_rate_table("upper_higher", true, hs, uphighs, result.reference));
  }

  // figure data: summed error series
  auto series = [&](const std::string& name, const std::string& desc, auto value) {
    ErrSeries s;
    s.name = name;
    s.description = desc;
    for (const LevelResult& level : result.levels) {
      if (level.failed) continue;
      const auto v = value(level);
      if (!v) continue;
      s.hs.push_back(level.h);
      s.values.push_back(*v);
    }
    s.fitted_rate = fit_rate(s.values, s.hs);
    result.err_series.push_back(std::move(s));
  };
  const int m = config.m;
  if (config.domain == DomainKind::UnitSquare && have_ref) {
    series("Err1", "sum_j (lambda_j - lower_j)", [&](const LevelResult& l) -> std::optional<double> {
      double s = 0;
      for (int j = 0; j < m; ++j) s += result.reference[static_cast<size_t>(j)] - l.lower[static_cast<size_t>(j)];
      return s;
    });
    if (config.post_lowest)
      series("Err2", "sum_j (upper_lowest_j - lambda_j)",
             [&](const LevelResult& l) -> std::optional<double> {
               if (l.upper_lowest.empty()) return std::nullopt;
               double s = 0;
               for (int j = 0; j < m; ++j)
                 s += l.upper_lowest[static_cast<size_t>(j)] - result.reference[static_cast<size_t>(j)];
               return s;
             });
    if (config.post_higher)
      series("Err3", "sum_j (upper_higher_j - lambda_j)",
             [&](const LevelResult& l) -> std::optional<double> {
               if (l.upper_higher.size() < static_cast<size_t>(m)) return std::nullopt;
               double s = 0;
               for (int j = 0; j < m; ++j)
                 s += l.upper_higher[static_cast<size_t>(j)] - result.reference[static_cast<size_t>(j)];
               return s;
             });
  } else {
    if (config.post_lowest)
      series("Err1", "sum_j (upper_lowest_j - lower_j)",
             [&](const LevelResult& l) -> std::optional<double> {
               if (l.upper_lowest.empty()) return std::nullopt;
               double s = 0;
               for (int j = 0; j < m; ++j)
                 s += l.upper_lowest[static_cast<size_t>(j)] - l.lower[static_cast<size_t>(j)];
               return s;
             });
    if (config.post_higher)
      series("Err2", "sum_j (upper_higher_j - lower_j)",
             [&](const LevelResult& l) -> std::optional<double> {
               if (l.upper_higher.size() < static_cast<size_t>(m)) return std::nullopt;
               double s = 0;
               for (int j = 0; j < m; ++j)
                 s += l.upper_higher[static_cast<size_t>(j)] - l.lower[static_cast<size_t>(j)];
               return s;
             });
  }

  return result;
}

/// Bound-direction violations: on the square each computed value is checked
/// against the exact spectrum; everywhere the enclosure must be noninverted.
inline std::vector<std::string> verify_bounds(const ExperimentResult& result) {
  std::vector<std::string> violations;
  const double slack = 1e-9;
  for (const LevelResult& level : result.levels) {
    if (level.failed) {
      violations.push_back("level n=" + std::to_string(level.n) + " failed: " + level.error);
      continue;
    }
    for (const EnclosureRow& row : level.enclosure.rows)
      if (row.inverted)
        violations.push_back("n=" + std::to_string(level.n) + " j=" + std::to_string(row.j) +
                             ": enclosure inverted");
    if (result.config.domain == DomainKind::UnitSquare && result.reference_certified) {
      for (size_t j = 0; j < level.lower.size(); ++j) {
        const double exact = result.reference[j];
        if (level.lower[j] > exact * (1.0 + slack))
          violations.push_back("n=" + std::to_string(level.n) + " j=" + std::to_string(j + 1) +
                               ": lower bound exceeds the exact eigenvalue");
        if (j < level.upper_lowest.size() && level.upper_lowest[j] < exact * (1.0 - slack))
          violations.push_back("n=" + std::to_string(level.n) + " j=" + std::to_string(j + 1) +
                               ": lowest-order upper bound below the exact eigenvalue");
        if (j < level.upper_higher.size() && level.upper_higher[j] < exact * (1.0 - slack))
          violations.push_back("n=" + std::to_string(level.n) + " j=" + std::to_string(j + 1) +
                               ": higher-order upper bound below the exact eigenvalue");
      }
    }
  }
  return violations;
}

// ---------------------------------------------------------------------------
// emitters

namespace detail {

inline std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string trend_arrow(const std::vector<double>& column) {
  bool inc = true, dec = true;
  for (size_t i = 1; i < column.size(); ++i) {
    inc = inc && column[i] > column[i - 1];
    dec = dec && column[i] < column[i - 1];
  }
  if (column.size() < 2 || inc == dec) return "-";
  return inc ? "↗" : "↘";
}

}  // namespace detail

/// CSV: one row per (level, eigenvalue index); `rate` is the stepwise decay
/// rate of the enclosure width against the previous level.
inline std::string emit_csv(const ExperimentResult& result) {
  std::ostringstream os;
  os << "domain,element,n,h,j,lambda_lower,lambda_upper_lowest,lambda_upper_higher,width,rate\n";
  const std::string domain = result.config.domain == DomainKind::UnitSquare ? "square" : "lshape";
  const std::string element = element_name(result.config.nc_kind);
  const LevelResult* prev = nullptr;
  for (const LevelResult& level : result.levels) {
    if (level.failed) continue;
    for (size_t j = 0; j < level.lower.size(); ++j) {
      os << domain << ',' << element << ',' << level.n << ',' << detail::fmt(level.h) << ','
         << (j + 1) << ',' << detail::fmt(level.lower[j]) << ',';
      if (j < level.upper_lowest.size()) os << detail::fmt(level.upper_lowest[j]);
      os << ',';
      if (j < level.upper_higher.size()) os << detail::fmt(level.upper_higher[j]);
      os << ',';
      const EnclosureRow& row = level.enclosure.rows[j];
      const bool has_width = row.upper_lowest || row.upper_higher;
      if (has_width) os << detail::fmt(row.width);
      os << ',';
      if (prev && has_width && j < prev->enclosure.rows.size()) {
        const EnclosureRow& prow = prev->enclosure.rows[j];
        if ((prow.upper_lowest || prow.upper_higher) && prow.width > 0.0 && row.width > 0.0 &&
            prev->h > level.h)
          os << detail::fmt(std::log(prow.width / row.width) / std::log(prev->h / level.h));
      }
      os << '\n';
    }
    prev = &level;
  }
  return os.str();
}

/// Markdown tables mirroring the convergence-table layout (one table per
/// computed bound kind, one row per level, trailing Trend row).
inline std::string emit_markdown(const ExperimentResult& result) {
  std::ostringstream os;
  const std::string domain = result.config.domain == DomainKind::UnitSquare ? "unit square" : "L-shape";
  const int m = result.config.m;

  auto table = [&](const std::string& title, auto getter) {
    std::vector<const LevelResult*> ok;
    for (const LevelResult& level : result.levels)
      if (!level.failed && !getter(level).empty()) ok.push_back(&level);
    if (ok.empty()) return;
    os << "## " << title << " (" << domain << ")\n\n";
    os << "| h |";
    for (int j = 1; j <= m; ++j) os << " lambda_" << j << " |";
    os << "\n|---|";
    for (int j = 0; j < m; ++j) os << "---|";
    os << '\n';
    for (const LevelResult* level : ok) {
      os << "| " << detail::fmt(level->h) << " (n=" << level->n << ") |";
      const auto& vals = getter(*level);
      for (int j = 0; j < m; ++j)
        os << ' ' << (j < static_cast<int>(vals.size()) ? detail::fmt(vals[static_cast<size_t>(j)]) : "") << " |";
      os << '\n';
    }
    os << "| Trend |";
    for (int j = 0; j < m; ++j) {
      std::vector<double> column;
      for (const LevelResult* level : ok) {
        const auto& vals = getter(*level);
        if (j < static_cast<int>(vals.size())) column.push_back(vals[static_cast<size_t>(j)]);
      }
      os << ' ' << detail::trend_arrow(column) << " |";
    }
    os << "\n\n";
  };

  table(std::string(element_name(result.config.nc_kind)) + " eigenvalue lower bounds",
        [](const LevelResult& l) -> const std::vector<double>& { return l.lower; });
  if (result.config.post_lowest)
    table(std::string(element_name(result.config.lowest_kind())) + " postprocessed upper bounds",
          [](const LevelResult& l) -> const std::vector<double>& { return l.upper_lowest; });
  if (result.config.post_higher)
    table(std::string(element_name(result.config.higher_kind())) + " postprocessed upper bounds",
          [](const LevelResult& l) -> const std::vector<double>& { return l.upper_higher; });
  return os.str();
}

inline nlohmann::json to_json(const ExperimentResult& result) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["config"] = {
      {"domain", result.config.domain == DomainKind::UnitSquare ? "square" : "lshape"},
      {"element", element_name(result.config.nc_kind)},
      {"post_lowest", result.config.post_lowest},
      {"post_higher", result.config.post_higher},
      {"levels", result.config.levels},
      {"m", result.config.m},
      {"tol", result.config.tol},
      {"seed", result.config.seed},
  };
  j["reference"] = {{"certified", result.reference_certified}};
  for (double v : result.reference)
    j["reference"]["values"].push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json());
  j["levels"] = nlohmann::json::array();
  for (const LevelResult& level : result.levels) {
    nlohmann::json lj;
    lj["n"] = level.n;
    lj["h"] = level.h;
    lj["failed"] = level.failed;
    if (level.failed) {
      lj["error"] = level.error;
    } else {
      lj["lower"] = level.lower;
      lj["upper_lowest"] = level.upper_lowest;
      lj["upper_higher"] = level.upper_higher;
      lj["widths"] = nlohmann::json::array();
      for (const EnclosureRow& row : level.enclosure.rows)
        lj["widths"].push_back((row.upper_lowest || row.upper_higher) ? nlohmann::json(row.width)
                                                                      : nlohmann::json());
      lj["inverted"] = level.enclosure.any_inversion;
    }
    j["levels"].push_back(std::move(lj));
  }
  j["rate_tables"] = nlohmann::json::array();
  for (const RateTable& table : result.rate_tables) {
    nlohmann::json tj;
    tj["quantity"] = table.quantity;
    tj["h"] = table.hs;
    tj["errors"] = table.errors;
    tj["stepwise"] = nlohmann::json::array();
    for (const auto& row : table.stepwise) {
      nlohmann::json rj = nlohmann::json::array();
      for (double r : row) rj.push_back(std::isfinite(r) ? nlohmann::json(r) : nlohmann::json());
      tj["stepwise"].push_back(std::move(rj));
    }
    tj["fitted"] = nlohmann::json::array();
    for (const auto& f : table.fitted)
      tj["fitted"].push_back(f ? nlohmann::json(*f) : nlohmann::json());
    j["rate_tables"].push_back(std::move(tj));
  }
  j["err_series"] = nlohmann::json::array();
  for (const ErrSeries& s : result.err_series) {
    nlohmann::json sj;
    sj["name"] = s.name;
    sj["description"] = s.description;
    sj["h"] = s.hs;
    sj["values"] = s.values;
    if (s.fitted_rate) sj["fitted_rate"] = *s.fitted_rate;
    j["err_series"].push_back(std::move(sj));
  }
  j["any_inversion"] = result.any_inversion;
  j["any_failure"] = result.any_failure;
  return j;
}

enum class EmitFormat { Csv, Markdown, Json };

/// Writes the result bundle under `dir` and returns the file path.
inline std::filesystem::path emit(const ExperimentResult& result, EmitFormat format,
                                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::filesystem::path path = dir;
  std::string body;
  switch (format) {
    case EmitFormat::Csv:
      path /= "results.csv";
      body = emit_csv(result);
      break;
    case EmitFormat::Markdown:
      path /= "results.md";
      body = emit_markdown(result);
      break;
    case EmitFormat::Json:
      path /= "results.json";
      body = to_json(result).dump(2) + "\n";
      break;
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("emit: cannot open " + path.string());
  os << body;
  if (!os.good()) throw std::runtime_error("emit: write failed for " + path.string());
  return path;
}

}  // namespace eigenclose
