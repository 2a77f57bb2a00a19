#include "cli.hpp"

#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("isddp");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("ISDDP_LOG")) spdlog::cfg::helpers::load_levels(lvl);
  std::vector<std::string> args(argv + 1, argv + argc);
  return isddp::cli::run(args, std::cout, std::cerr);
}
