// Acceptance runner: one PASS/FAIL line per criterion. With no arguments every
// criterion runs; otherwise only the named ones (AC-1 ... AC-8).

#include "acceptance.hpp"

#include <chrono>
#include <cstdio>
#include <exception>
#include <map>
#include <string>
#include <vector>

using namespace urllc::acceptance;

int main(int argc, char** argv) {
    const std::map<std::string, Verdict (*)()> criteria{
        {"AC-1", ac1}, {"AC-2", ac2}, {"AC-3", ac3}, {"AC-4", ac4},
        {"AC-5", ac5}, {"AC-6", ac6}, {"AC-7", ac7}, {"AC-8", ac8},
    };
    std::vector<std::string> wanted(argv + 1, argv + argc);
    if (wanted.empty())
        for (const auto& [id, fn] : criteria) wanted.push_back(id);

    int failed = 0;
    for (const auto& id : wanted) {
        const auto it = criteria.find(id);
        if (it == criteria.end()) {
            std::printf("%s FAIL unknown criterion\n", id.c_str());
            ++failed;
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = it->second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %s %s [%.1f s]\n", id.c_str(), v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !v.pass;
    }
    return failed == 0 ? 0 : 1;
}
