#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "relalg/cli.hpp"

namespace {

bool color_enabled() {
  const char* env = std::getenv("RELALG_COLOR");
  std::string mode = env ? env : "auto";
  if (mode == "never") return false;
  if (mode == "always") return true;
  return isatty(STDOUT_FILENO) != 0;
}

void add_common(CLI::App* sub, relalg::cli::Options& opt, std::string& emit) {
  sub->add_option("FILE", opt.file, "input .ralg file")->required();
  sub->add_option("--algebroid", opt.algebroid, "algebroid or jets block to use (default: first)");
  sub->add_option("--emit", emit, "output format")->check(CLI::IsMember({"json", "text"}));
  sub->add_flag("--deterministic", opt.deterministic, "omit timing information");
  sub->add_flag("--trig-rewrite", opt.trig, "rewrite sin^2 + cos^2 to 1 during normalization");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relalg: structure equations, prolongations and towers of relative algebroids"};
  app.require_subcommand(1);
  relalg::cli::Options opt;
  std::string emit = "text";

  auto* check = app.add_subcommand("check", "validate and test D^2 = 0");
  auto* bracket = app.add_subcommand("bracket", "print bracket and anchor tables");
  auto* prolong = app.add_subcommand("prolong", "compute one prolongation");
  auto* tower = app.add_subcommand("tower", "iterate prolongations");
  auto* realize = app.add_subcommand("realize", "check a realization against its algebroid");
  auto* jets = app.add_subcommand("jets", "compile a jets block and prolong it classically");
  for (auto* sub : {check, bracket, prolong, tower, realize, jets}) add_common(sub, opt, emit);
  for (auto* sub : {check, prolong, tower}) {
    sub->add_option("--adjoin", opt.adjoin, "adjoin a constraint LHS = RHS (or EXPR, meaning EXPR = 0)");
  }
  tower->add_option("--depth", opt.depth, "number of prolongation steps")->required()->check(CLI::PositiveNumber);
  realize->add_option("--realization", opt.realization, "realization block name")->required();
  jets->add_option("--then", opt.then, "command to run on the compiled algebroid")
      ->check(CLI::IsMember({"check", "bracket", "prolong", "tower"}));
  jets->add_option("--depth", opt.depth, "depth for --then tower")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  opt.command = app.get_subcommands().front()->get_name();
  opt.json = emit == "json";
  opt.color = !opt.json && color_enabled();

  std::ifstream in(opt.file, std::ios::binary);
  if (!in) {
    std::cerr << "relalg: cannot read " << opt.file << "\n";
    return 2;
  }
  std::stringstream buf;
  buf << in.rdbuf();

  try {
    relalg::Document doc = relalg::parse(buf.str());
    relalg::cli::Report rep = relalg::cli::run(opt, doc);
    std::cout << relalg::cli::render(rep, opt.json);
    return rep.exit_code;
  } catch (const relalg::ParseError& e) {
    std::cerr << opt.file << ":" << e.what() << "\n";
    return 2;
  } catch (const relalg::cli::UsageError& e) {
    std::cerr << "relalg: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "relalg: internal error: " << e.what() << "\n";
    return 3;
  }
}
