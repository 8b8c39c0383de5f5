#pragma once

#include <exception>
#include <thread>
#include <utility>

namespace xdup::testsupport {

// Run the two protocol roles concurrently and rethrow the first failure.
template <typename FA, typename FB>
void run_pair(FA&& fa, FB&& fb) {
    std::exception_ptr ea, eb;
    std::thread ta([&] {
        try {
            fa();
        } catch (...) {
            ea = std::current_exception();
        }
    });
    try {
        fb();
    } catch (...) {
        eb = std::current_exception();
    }
    ta.join();
    if (ea) std::rethrow_exception(ea);
    if (eb) std::rethrow_exception(eb);
}

}  // namespace xdup::testsupport
