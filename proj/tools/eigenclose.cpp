// eigenclose CLI: certified two-sided Laplace-Dirichlet eigenvalue bounds on
// the unit square and L-shape, with convergence sweeps and table emission.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "eigenclose/report.hpp"

namespace {

using namespace eigenclose;

DomainKind parse_domain(const std::string& s) {
  if (s == "square") return DomainKind::UnitSquare;
  if (s == "lshape") return DomainKind::LShape;
  throw CLI::ValidationError("--domain must be square or lshape");
}

ElementKind parse_nc_element(const std::string& s) {
  if (s == "ecr") return ElementKind::ECR;
  if (s == "eq1rot") return ElementKind::EQ1Rot;
  throw CLI::ValidationError("--element must be ecr or eq1rot");
}

ElementKind parse_any_element(const std::string& s) {
  if (s == "ecr") return ElementKind::ECR;
  if (s == "eq1rot") return ElementKind::EQ1Rot;
  if (s == "p1") return ElementKind::P1;
  if (s == "q1") return ElementKind::Q1;
  if (s == "p2") return ElementKind::P2;
  if (s == "q2") return ElementKind::Q2;
  throw CLI::ValidationError("unknown element kind: " + s);
}

int run_command(const std::string& domain, const std::string& element,
                const std::vector<int>& levels, int m, const std::string& post, double tol,
                std::uint64_t seed, const std::string& format, const std::string& out_dir) {
  ExperimentConfig config;
  config.domain = parse_domain(domain);
  config.nc_kind = parse_nc_element(element);
  config.levels = levels;
  config.m = m;
  config.tol = tol;
  config.seed = seed;
  if (post == "lowest") {
    config.post_lowest = true;
    config.post_higher = false;
  } else if (post == "higher") {
    config.post_lowest = false;
    config.post_higher = true;
  } else if (post == "both") {
    config.post_lowest = config.post_higher = true;
  } else if (post == "none") {
    config.post_lowest = config.post_higher = false;
  } else {
    throw CLI::ValidationError("--post must be lowest, higher, both or none");
  }

  EmitFormat emit_format = EmitFormat::Csv;
  if (format == "csv")
    emit_format = EmitFormat::Csv;
  else if (format == "markdown")
    emit_format = EmitFormat::Markdown;
  else if (format == "json")
    emit_format = EmitFormat::Json;
  else
    throw CLI::ValidationError("--format must be csv, markdown or json");

  const ExperimentResult result = run_experiment(config);
  const std::filesystem::path path = emit(result, emit_format, out_dir);
  std::cout << "wrote " << path.string() << "\n";

  for (const LevelResult& level : result.levels) {
    if (level.failed) {
      std::cout << "n=" << level.n << "  FAILED: " << level.error << "\n";
      continue;
    }
    std::cout << "n=" << level.n << "  h=" << level.h;
    for (size_t j = 0; j < level.lower.size(); ++j) {
      std::cout << "  [" << level.lower[j];
      if (j < level.upper_higher.size())
        std::cout << ", " << level.upper_higher[j];
      else if (j < level.upper_lowest.size())
        std::cout << ", " << level.upper_lowest[j];
      std::cout << "]";
    }
    std::cout << "\n";
  }

  const std::vector<std::string> violations = verify_bounds(result);
  if (result.any_failure) {
    for (const std::string& v : violations) std::cerr << "violation: " << v << "\n";
    return 1;
  }
  if (!violations.empty()) {
    for (const std::string& v : violations) std::cerr << "violation: " << v << "\n";
    return 2;
  }
  std::cout << "all bound directions verified\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-sided Laplace eigenvalue bounds by nonconforming/conforming element pairs"};
  app.require_subcommand(1);

  // run
  std::string domain = "square", element = "eq1rot", post = "both", format = "csv", out = "out";
  std::vector<int> levels = {8, 16, 32, 64};
  int m = 6;
  double tol = 1e-10;
  std::uint64_t seed = 42;
  CLI::App* run = app.add_subcommand("run", "run a refinement sweep and emit tables");
  run->add_option("--domain", domain, "square | lshape")->capture_default_str();
  run->add_option("--element", element, "ecr | eq1rot")->capture_default_str();
  run->add_option("--levels", levels, "subdivisions per unit length, increasing")
      ->delimiter(',')
      ->capture_default_str();
  run->add_option("--m", m, "number of eigenvalues")->capture_default_str();
  run->add_option("--post", post, "lowest | higher | both | none")->capture_default_str();
  run->add_option("--tol", tol, "eigensolver residual tolerance")->capture_default_str();
  run->add_option("--seed", seed, "start-block seed")->capture_default_str();
  run->add_option("--format", format, "csv | markdown | json")->capture_default_str();
  run->add_option("--out", out, "output directory")->capture_default_str();

  // dump-mesh
  std::string md_domain = "square", md_cells = "rect", md_out = "-";
  int md_n = 8, md_refine = 0;
  CLI::App* dump_mesh = app.add_subcommand("dump-mesh", "write a mesh in plain-text format");
  dump_mesh->add_option("--domain", md_domain, "square | lshape")->capture_default_str();
  dump_mesh->add_option("--cells", md_cells, "tri | rect")->capture_default_str();
  dump_mesh->add_option("--n", md_n, "subdivisions per unit length")->capture_default_str();
  dump_mesh->add_option("--refine", md_refine, "uniform refinements to apply")->capture_default_str();
  dump_mesh->add_option("--out", md_out, "output file, - for stdout")->capture_default_str();

  // dump-matrix
  std::string mx_domain = "square", mx_element = "eq1rot", mx_which = "stiffness", mx_out = "-";
  int mx_n = 8;
  CLI::App* dump_matrix =
      app.add_subcommand("dump-matrix", "write an assembled matrix in coordinate text format");
  dump_matrix->add_option("--domain", mx_domain, "square | lshape")->capture_default_str();
  dump_matrix->add_option("--element", mx_element, "ecr | eq1rot | p1 | q1 | p2 | q2")
      ->capture_default_str();
  dump_matrix->add_option("--n", mx_n, "subdivisions per unit length")->capture_default_str();
  dump_matrix->add_option("--which", mx_which, "stiffness | mass")->capture_default_str();
  dump_matrix->add_option("--out", mx_out, "output file, - for stdout")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(domain, element, levels, m, post, tol, seed, format, out);

    if (dump_mesh->parsed()) {
      const CellKind cells = md_cells == "tri" ? CellKind::Triangle : CellKind::Rectangle;
      Mesh mesh = build_mesh(parse_domain(md_domain), cells, md_n);
      for (int r = 0; r < md_refine; ++r) mesh = refine_uniform(mesh);
      if (md_out == "-") {
        write_mesh(mesh, std::cout);
      } else {
        std::ofstream os(md_out);
        if (!os) throw std::runtime_error("cannot open " + md_out);
        write_mesh(mesh, os);
      }
      return 0;
    }

    if (dump_matrix->parsed()) {
      const ElementKind kind = parse_any_element(mx_element);
      const CellKind cells = element_info(kind).cell_kind;
      const Mesh mesh = build_mesh(parse_domain(mx_domain), cells, mx_n);
      const AssembledSystem sys = assemble(mesh, kind);
      const SymSparseMatrix& mat = mx_which == "mass" ? sys.mass : sys.stiffness;
      if (mx_out == "-") {
        mat.write_coordinate(std::cout);
      } else {
        std::ofstream os(mx_out);
        if (!os) throw std::runtime_error("cannot open " + mx_out);
        mat.write_coordinate(os);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
