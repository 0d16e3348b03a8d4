#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "timefuse/error.hpp"

namespace timefuse {

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> values)
        : rows(r), cols(c), data(std::move(values)) {
        if (data.size() != rows * cols) {
            fail(ErrorKind::ShapeMismatch, "matrix payload does not match " + std::to_string(rows) +
                                               "x" + std::to_string(cols));
        }
    }

    [[nodiscard]] double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    [[nodiscard]] double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    [[nodiscard]] std::size_t size() const noexcept { return data.size(); }
    [[nodiscard]] bool same_shape(const Matrix& other) const noexcept {
        return rows == other.rows && cols == other.cols;
    }
};

/// One input instance: t_in time steps by d variables, row-major.
class TimeSeriesWindow {
public:
    static constexpr std::size_t kMinLength = 8;

    TimeSeriesWindow() = default;

    /// Validates length and finiteness.
    TimeSeriesWindow(std::size_t t_in, std::size_t d, std::vector<double> values)
        : t_in_(t_in), d_(d), values_(std::move(values)) {
        if (d_ == 0) fail(ErrorKind::ShapeMismatch, "window needs at least one variable");
        if (values_.size() != t_in_ * d_) {
            fail(ErrorKind::ShapeMismatch, "window payload has " + std::to_string(values_.size()) +
                                               " values, expected " + std::to_string(t_in_ * d_));
        }
        if (t_in_ < kMinLength) {
            fail(ErrorKind::WindowTooShort,
                 "window has " + std::to_string(t_in_) + " steps, need at least " +
                     std::to_string(kMinLength));
        }
        for (double v : values_) {
            if (!std::isfinite(v)) fail(ErrorKind::NonFiniteInput, "window contains NaN or Inf");
        }
    }

    static TimeSeriesWindow univariate(std::vector<double> series) {
        const std::size_t n = series.size();
        return TimeSeriesWindow(n, 1, std::move(series));
    }

    [[nodiscard]] std::size_t length() const noexcept { return t_in_; }
    [[nodiscard]] std::size_t variables() const noexcept { return d_; }
    [[nodiscard]] double operator()(std::size_t t, std::size_t j) const { return values_[t * d_ + j]; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

    [[nodiscard]] std::vector<double> variable(std::size_t j) const {
        std::vector<double> out(t_in_);
        for (std::size_t t = 0; t < t_in_; ++t) out[t] = values_[t * d_ + j];
        return out;
    }

private:
    std::size_t t_in_ = 0;
    std::size_t d_ = 0;
    std::vector<double> values_;
};

inline void require_unique_roster(const std::vector<std::string>& roster) {
    std::unordered_set<std::string> seen;
    for (const auto& name : roster) {
        if (name.empty()) fail(ErrorKind::InvalidParameter, "empty model name in roster");
        if (!seen.insert(name).second) {
            fail(ErrorKind::DuplicateModelName, "model '" + name + "' appears twice in the roster");
        }
    }
}

/// Stacked zoo outputs, k x t_out x d, row-major; roster order is the weight index order.
struct PredictionTensor {
    std::vector<std::string> roster;
    std::size_t t_out = 0;
    std::size_t d = 0;
    std::vector<double> values;

    PredictionTensor() = default;
    PredictionTensor(std::vector<std::string> names, std::size_t horizon, std::size_t vars,
                     std::vector<double> payload)
        : roster(std::move(names)), t_out(horizon), d(vars), values(std::move(payload)) {
        validate();
    }

    [[nodiscard]] std::size_t k() const noexcept { return roster.size(); }
    [[nodiscard]] std::size_t slice_size() const noexcept { return t_out * d; }
    [[nodiscard]] std::span<const double> slice(std::size_t model) const {
        return std::span<const double>(values).subspan(model * slice_size(), slice_size());
    }

    void validate() const {
        if (roster.size() < 2) fail(ErrorKind::ShapeMismatch, "a model zoo needs at least two models");
        require_unique_roster(roster);
        if (t_out == 0 || d == 0) fail(ErrorKind::ShapeMismatch, "empty prediction horizon");
        if (values.size() != roster.size() * t_out * d) {
            fail(ErrorKind::ShapeMismatch, "prediction payload does not match k x t_out x d");
        }
        for (double v : values) {
            if (!std::isfinite(v)) fail(ErrorKind::NonFiniteInput, "prediction contains NaN or Inf");
        }
    }
};

}  // namespace timefuse
