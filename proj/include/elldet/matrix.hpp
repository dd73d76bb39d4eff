#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "elldet/tracked_value.hpp"

namespace elldet {

/// Dense square-or-rectangular matrix of TrackedValues, immutable by
/// convention once built.
template <typename Real = double>
class TrackedMatrixT {
public:
    using TV = TrackedValueT<Real>;

    TrackedMatrixT() = default;
    TrackedMatrixT(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, TV::exact_zero()) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    TV& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const TV& at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    /// Submatrix of the given rows and columns (fresh copy).
    TrackedMatrixT minor_at(std::span<const int> rs, std::span<const int> cs) const {
        TrackedMatrixT m(rs.size(), cs.size());
        for (std::size_t i = 0; i < rs.size(); ++i)
            for (std::size_t j = 0; j < cs.size(); ++j)
                m.at(i, j) = at(static_cast<std::size_t>(rs[i]), static_cast<std::size_t>(cs[j]));
        return m;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<TV> data_;
};

using TrackedMatrix = TrackedMatrixT<double>;

/// Serialize to { family, r1, r2, params, entries: [[re, im, zero_order]] }
/// with entries flattened row-major. Exact zeros serialize as value 0 with
/// their zero order; poles keep a negative order.
template <typename Real>
nlohmann::json matrix_to_json(const TrackedMatrixT<Real>& m, const std::string& family, int r1,
                              int r2, const nlohmann::json& params) {
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const auto& v = m.at(i, j);
            cplx val = v.is_finite_nonzero() ? to_double_complex(v.value()) : cplx(0.0, 0.0);
            entries.push_back({val.real(), val.imag(), v.zero_order()});
        }
    }
    return {{"family", family}, {"r1", r1}, {"r2", r2}, {"params", params}, {"entries", entries}};
}

inline TrackedMatrix matrix_from_json(const nlohmann::json& j) {
    int r1 = j.at("r1").get<int>();
    int r2 = j.at("r2").get<int>();
    std::size_t n = static_cast<std::size_t>(r1 + r2);
    const auto& entries = j.at("entries");
    if (entries.size() != n * n)
        throw std::invalid_argument("matrix_from_json: entry count does not match r1+r2");
    TrackedMatrix m(n, n);
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const auto& e = entries[k];
        int zo = e.at(2).get<int>();
        cplx v(e.at(0).get<double>(), e.at(1).get<double>());
        m.at(k / n, k % n) = zo == 0 ? TrackedValue::of(v) : TrackedValue::exact_zero(zo);
    }
    return m;
}

} // namespace elldet
