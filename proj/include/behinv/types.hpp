#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>

namespace behinv {

// Finite window of a discrete-time vector signal.  Sample i is the value at
// time start_index() + i; samples are the columns of data().
class Signal {
public:
    Signal() = default;

    Signal(int start_index, Eigen::MatrixXd samples)
        : start_(start_index), data_(std::move(samples)) {
        if (data_.rows() < 1) {
            throw std::invalid_argument("Signal: dimension must be at least 1");
        }
    }

    static Signal zeros(int dim, int length, int start_index = 0) {
        if (dim < 1 || length < 0) {
            throw std::invalid_argument("Signal::zeros: dimension must be >= 1 and length >= 0");
        }
        return Signal(start_index, Eigen::MatrixXd::Zero(dim, length));
    }

    int dim() const { return static_cast<int>(data_.rows()); }
    int length() const { return static_cast<int>(data_.cols()); }
    int start_index() const { return start_; }
    // Time index of the last sample; start_index() - 1 when empty.
    int end_index() const { return start_ + length() - 1; }

    const Eigen::MatrixXd& data() const { return data_; }

    // Value at absolute time index k.
    Eigen::VectorXd at(int k) const { return data_.col(offset(k)); }

    void set(int k, const Eigen::VectorXd& value) {
        if (value.size() != data_.rows()) {
            throw std::invalid_argument("Signal::set: value has wrong dimension");
        }
        data_.col(offset(k)) = value;
    }

    // Samples over [k_from, k_to] stacked into one column (value at k_from first).
    Eigen::VectorXd stacked(int k_from, int k_to) const {
        check_window(k_from, k_to);
        return data_.middleCols(k_from - start_, k_to - k_from + 1).reshaped();
    }

    // Sub-signal over the absolute time window [k_from, k_to].
    Signal window(int k_from, int k_to) const {
        check_window(k_from, k_to);
        return Signal(k_from, data_.middleCols(k_from - start_, k_to - k_from + 1));
    }

private:
    int offset(int k) const {
        if (k < start_ || k > end_index()) {
            throw std::out_of_range("Signal: time index " + std::to_string(k) +
                                    " outside [" + std::to_string(start_) + ", " +
                                    std::to_string(end_index()) + "]");
        }
        return k - start_;
    }

    void check_window(int k_from, int k_to) const {
        if (k_to < k_from) {
            throw std::invalid_argument("Signal: window end precedes start");
        }
        offset(k_from);
        offset(k_to);
    }

    int start_ = 0;
    Eigen::MatrixXd data_;
};

// Discrete-time LTI system x(k+1) = A x(k) + B u(k), y(k) = C x(k) + D u(k).
struct StateSpaceSystem {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd C;
    Eigen::MatrixXd D;

    StateSpaceSystem(Eigen::MatrixXd A_in, Eigen::MatrixXd B_in,
                     Eigen::MatrixXd C_in, Eigen::MatrixXd D_in)
        : A(std::move(A_in)), B(std::move(B_in)), C(std::move(C_in)), D(std::move(D_in)) {
        if (A.rows() < 1 || A.rows() != A.cols()) {
            throw std::invalid_argument("StateSpaceSystem: A must be square and non-empty");
        }
        if (B.rows() != A.rows() || B.cols() < 1) {
            throw std::invalid_argument("StateSpaceSystem: B must be n x m with m >= 1");
        }
        if (C.cols() != A.rows() || C.rows() < 1) {
            throw std::invalid_argument("StateSpaceSystem: C must be p x n with p >= 1");
        }
        if (D.rows() != C.rows() || D.cols() != B.cols()) {
            throw std::invalid_argument("StateSpaceSystem: D must be p x m");
        }
    }

    int state_dim() const { return static_cast<int>(A.rows()); }
    int input_dim() const { return static_cast<int>(B.cols()); }
    int output_dim() const { return static_cast<int>(C.rows()); }
};

}  // namespace behinv
