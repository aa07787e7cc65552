#include "floodens/cli.hpp"

int main(int argc, char** argv) {
    return floodens::run_cli(argc, argv);
}
