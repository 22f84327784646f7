#include "setdino/common.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <Eigen/Core>

namespace setdino {

namespace {
std::atomic<bool> g_quiet{false};
std::atomic<int> g_threads{1};
std::mutex g_log_mutex;
}  // namespace

void set_log_quiet(bool quiet) { g_quiet.store(quiet); }
bool log_quiet() { return g_quiet.load(); }

void warn(const std::string& msg) {
    if (g_quiet.load()) return;
    std::lock_guard<std::mutex> lock(g_log_mutex);
    std::fprintf(stderr, "[setdino] warning: %s\n", msg.c_str());
}

void info(const std::string& msg) {
    if (g_quiet.load()) return;
    std::lock_guard<std::mutex> lock(g_log_mutex);
    std::fprintf(stderr, "[setdino] %s\n", msg.c_str());
}

void set_threads(int n) {
    if (n < 1) n = 1;
    g_threads.store(n);
#ifdef _OPENMP
    omp_set_num_threads(n);
#endif
    Eigen::setNbThreads(n);
}

int threads() { return g_threads.load(); }

std::vector<int> Rng::sample_without_replacement(int n, int k) {
    if (k > n) k = n;
    std::vector<int> out;
    out.reserve(k);
    if (k * 3 >= n) {
        // dense case: partial Fisher-Yates
        std::vector<int> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        for (int i = 0; i < k; ++i) {
            int j = i + uniform_index(n - i);
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
    } else {
        // sparse case: rejection with a small set
        std::vector<bool> taken(n, false);
        while (static_cast<int>(out.size()) < k) {
            int j = uniform_index(n);
            if (!taken[j]) {
                taken[j] = true;
                out.push_back(j);
            }
        }
    }
    return out;
}

std::string format_size(std::size_t bytes) {
    char buf[64];
    if (bytes >= (1ull << 20))
        std::snprintf(buf, sizeof(buf), "%.1f MiB", static_cast<double>(bytes) / (1ull << 20));
    else if (bytes >= (1ull << 10))
        std::snprintf(buf, sizeof(buf), "%.1f KiB", static_cast<double>(bytes) / (1ull << 10));
    else
        std::snprintf(buf, sizeof(buf), "%zu B", bytes);
    return buf;
}

}  // namespace setdino
