#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pacabs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class of every error raised by the library. The message always
/// names the offending operation first, e.g. "bounding_box: no points".
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computation was asked for something the numerics cannot deliver
/// (singular matrix, flat hull, ...).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A precondition on arguments was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

[[noreturn]] inline void fail(const std::string& what) { throw InvalidArgument(what); }

inline void require(bool condition, const std::string& what) {
    if (!condition) fail(what);
}

inline std::string dims_string(Eigen::Index a, Eigen::Index b) {
    return std::to_string(a) + " vs " + std::to_string(b);
}

inline unsigned resolve_workers(unsigned requested) {
    if (requested != 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

/// Runs body(i) for every i in [0, count) on up to `workers` threads
/// (0 = hardware concurrency). Indices are handed out in chunks; results
/// must be written to per-index slots by the caller. The first exception
/// thrown by any worker is rethrown on the calling thread.
template <typename Body>
void parallel_for(std::size_t count, Body&& body, unsigned workers = 0, std::size_t chunk = 0) {
    if (count == 0) return;
    const unsigned threads = static_cast<unsigned>(
        std::min<std::size_t>(resolve_workers(workers), count));
    if (chunk == 0) chunk = std::max<std::size_t>(1, count / (std::size_t(threads) * 8));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        try {
            for (;;) {
                const std::size_t begin = next.fetch_add(chunk);
                if (begin >= count) break;
                const std::size_t end = std::min(count, begin + chunk);
                for (std::size_t i = begin; i < end; ++i) body(i);
            }
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            next.store(count);
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    pool.clear();
    if (first_error) std::rethrow_exception(first_error);
}

/// SplitMix64 finalizer; used to derive independent stream seeds from a
/// root seed so that per-action and per-trial randomness is reproducible
/// regardless of scheduling.
inline std::uint64_t split_seed(std::uint64_t root, std::uint64_t stream) {
    std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace pacabs
