#pragma once

#include <cstddef>
#include <vector>

#include "pbql/errors.hpp"

namespace pbql {

/** Dense row-major |S| x |X| table of doubles. The workhorse value container
    for Q-tables, bound tables, and reward/kernel summaries. */
class ValueTable {
  public:
    ValueTable() = default;

    ValueTable(int n_rows, int n_cols, double fill = 0.0)
        : n_rows_(n_rows), n_cols_(n_cols),
          values_(static_cast<std::size_t>(n_rows) * n_cols, fill) {
        if (n_rows <= 0 || n_cols <= 0)
            throw DomainError("ValueTable: dimensions must be positive");
    }

    int rows() const { return n_rows_; }
    int cols() const { return n_cols_; }

    double& at(int r, int c) { return values_[index(r, c)]; }
    double at(int r, int c) const { return values_[index(r, c)]; }

    double row_max(int r) const {
        double best = at(r, 0);
        for (int c = 1; c < n_cols_; ++c)
            if (at(r, c) > best) best = at(r, c);
        return best;
    }

    /** Index of the row maximum; ties break toward the lowest column id. */
    int row_argmax(int r) const {
        int best = 0;
        for (int c = 1; c < n_cols_; ++c)
            if (at(r, c) > at(r, best)) best = c;
        return best;
    }

    bool same_shape(const ValueTable& other) const {
        return n_rows_ == other.n_rows_ && n_cols_ == other.n_cols_;
    }

    const std::vector<double>& data() const { return values_; }
    std::vector<double>& data() { return values_; }

    friend bool operator==(const ValueTable&, const ValueTable&) = default;

  private:
    std::size_t index(int r, int c) const {
        if (r < 0 || r >= n_rows_ || c < 0 || c >= n_cols_)
            throw DomainError("ValueTable: index out of range");
        return static_cast<std::size_t>(r) * n_cols_ + c;
    }

    int n_rows_ = 0;
    int n_cols_ = 0;
    std::vector<double> values_;
};

} // namespace pbql
