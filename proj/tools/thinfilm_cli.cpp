// Command-line surface for the thin-film assessment pipeline.
// Subcommands are filled in as the modules land.

#include <cstdio>

int main(int, char**) {
    std::puts("thinfilm: subcommands not wired up yet");
    return 0;
}
