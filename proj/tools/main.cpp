#include <iostream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "scenedialog/cli.hpp"

int main(int argc, char** argv) {
  // stdout carries command results; diagnostics go to stderr.
  spdlog::set_default_logger(spdlog::stderr_color_mt("scenedialog"));
  std::vector<std::string> args(argv + 1, argv + argc);
  return scenedialog::run_cli(args, std::cout, std::cerr);
}
