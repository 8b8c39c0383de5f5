#include "oracle.hpp"

#include <algorithm>
#include <stdexcept>

namespace xdup::oracle {

std::uint32_t naive_hamming(const BitString& a, const BitString& b) {
    if (a.dimension() != b.dimension())
        throw std::invalid_argument("naive_hamming: dimension mismatch");
    std::uint32_t d = 0;
    for (std::uint32_t i = 1; i <= a.dimension(); ++i)
        d += a.get(i) != b.get(i);
    return d;
}

std::vector<IndexPair> bruteforce_fpsi(const std::vector<BitString>& Q,
                                       const std::vector<BitString>& R,
                                       std::uint32_t tau) {
    std::vector<IndexPair> out;
    for (std::uint64_t i = 0; i < Q.size(); ++i)
        for (std::uint64_t j = 0; j < R.size(); ++j)
            if (naive_hamming(Q[i], R[j]) <= tau) out.emplace_back(i, j);
    return out;
}

namespace {

std::string expand(const BitString& s) {
    std::string out(s.dimension(), '0');
    for (std::uint32_t i = 1; i <= s.dimension(); ++i)
        if (s.get(i)) out[i - 1] = '1';
    return out;
}

}  // namespace

std::vector<IndexPair> bruteforce_fpsi_alt(const std::vector<BitString>& Q,
                                           const std::vector<BitString>& R,
                                           std::uint32_t tau) {
    std::vector<std::string> q_str, r_str;
    for (const auto& q : Q) q_str.push_back(expand(q));
    for (const auto& r : R) r_str.push_back(expand(r));
    std::vector<IndexPair> out;
    for (std::uint64_t j = 0; j < r_str.size(); ++j)
        for (std::uint64_t i = 0; i < q_str.size(); ++i) {
            if (q_str[i].size() != r_str[j].size())
                throw std::invalid_argument("dimension mismatch");
            std::uint32_t d = 0;
            for (std::size_t c = 0; c < q_str[i].size(); ++c)
                d += q_str[i][c] != r_str[j][c];
            if (d <= tau) out.emplace_back(i, j);
        }
    std::sort(out.begin(), out.end());
    return out;
}

double exact_jaccard(const std::set<std::string>& x,
                     const std::set<std::string>& y) {
    if (x.empty() && y.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& e : x) inter += y.count(e);
    std::size_t uni = x.size() + y.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace xdup::oracle
