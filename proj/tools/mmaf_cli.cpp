#include <exception>
#include <iostream>

#include "mmaf/cli_io.hpp"

int main(int argc, char** argv) {
  try {
    const auto opt = mmaf::cli::parse_config(argc, argv);
    return mmaf::cli::run_cli(opt);
  } catch (const mmaf::cli::HelpRequested& help) {
    std::cout << help.text;
    return 0;
  } catch (const mmaf::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
