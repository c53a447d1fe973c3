#include <cstdio>

#include "spikewave/util.hpp"

int main() {
    std::printf("spikewave %s\n", spikewave::kToolVersion);
    return 0;
}
