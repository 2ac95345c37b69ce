#include "embkit/cli.hpp"

int main(int argc, char** argv) {
  return embkit::cli::dispatch(embkit::cli::Args(argv + 1, argv + argc));
}
