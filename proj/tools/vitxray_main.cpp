#include "vitxray/cli.hpp"

int main(int argc, char** argv) { return vitxray::cli::dispatch(argc, argv); }
