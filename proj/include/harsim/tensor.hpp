#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace harsim {

/// Dense (time, space, channel) tensor, row-major with channel fastest.
/// 1D sensor windows use space = 1; 2D branches view the same buffer as
/// (time, channels, 1).
template <typename T>
class BasicTensor {
public:
    BasicTensor() = default;
    BasicTensor(std::size_t t, std::size_t s, std::size_t c, T fill = T{})
        : t_(t), s_(s), c_(c), data_(t * s * c, fill) {}

    std::size_t time() const { return t_; }
    std::size_t space() const { return s_; }
    std::size_t channels() const { return c_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& at(std::size_t t, std::size_t s, std::size_t c) { return data_[(t * s_ + s) * c_ + c]; }
    const T& at(std::size_t t, std::size_t s, std::size_t c) const {
        return data_[(t * s_ + s) * c_ + c];
    }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    /// Same buffer, different (t, s, c) interpretation. Sizes must agree.
    BasicTensor reshaped(std::size_t t, std::size_t s, std::size_t c) const {
        BasicTensor out = *this;
        out.t_ = t;
        out.s_ = s;
        out.c_ = c;
        return out;
    }

    bool operator==(const BasicTensor&) const = default;

private:
    std::size_t t_ = 0;
    std::size_t s_ = 0;
    std::size_t c_ = 0;
    std::vector<T> data_;
};

using Tensor = BasicTensor<double>;
using ITensor = BasicTensor<std::int64_t>;

}  // namespace harsim
