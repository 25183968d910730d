#pragma once

#include <cstdint>
#include <vector>

#include "vst3/error.hpp"

namespace vst3 {

// MSB-first bit packing with unsigned/signed Exp-Golomb codes.
class BitWriter {
public:
    void put_bit(int bit) {
        acc_ = static_cast<uint8_t>((acc_ << 1) | (bit & 1));
        if (++nbits_ == 8) {
            bytes_.push_back(acc_);
            acc_ = 0;
            nbits_ = 0;
        }
    }

    void put_bits(uint32_t value, int count) {
        for (int i = count - 1; i >= 0; --i)
            put_bit(static_cast<int>((value >> i) & 1));
    }

    void put_ue(uint32_t value) {
        uint64_t v = static_cast<uint64_t>(value) + 1;
        int len = 0;
        for (uint64_t t = v; t > 1; t >>= 1)
            ++len;
        for (int i = 0; i < len; ++i)
            put_bit(0);
        for (int i = len; i >= 0; --i)
            put_bit(static_cast<int>((v >> i) & 1));
    }

    void put_se(int32_t value) {
        uint32_t mapped = value > 0 ? static_cast<uint32_t>(2 * value - 1)
                                    : static_cast<uint32_t>(-2 * static_cast<int64_t>(value));
        put_ue(mapped);
    }

    void align() {
        while (nbits_ != 0)
            put_bit(0);
    }

    const std::vector<uint8_t>& bytes() const { return bytes_; }
    std::vector<uint8_t> take() {
        align();
        return std::move(bytes_);
    }

private:
    std::vector<uint8_t> bytes_;
    uint8_t acc_ = 0;
    int nbits_ = 0;
};

class BitReader {
public:
    BitReader(const uint8_t* data, size_t size) : data_(data), size_(size) {}

    int get_bit() {
        require(byte_pos_ < size_, "corrupt-payload", "bitstream truncated");
        int bit = (data_[byte_pos_] >> (7 - bit_pos_)) & 1;
        if (++bit_pos_ == 8) {
            bit_pos_ = 0;
            ++byte_pos_;
        }
        return bit;
    }

    uint32_t get_bits(int count) {
        uint32_t v = 0;
        for (int i = 0; i < count; ++i)
            v = (v << 1) | static_cast<uint32_t>(get_bit());
        return v;
    }

    uint32_t get_ue() {
        int zeros = 0;
        while (get_bit() == 0) {
            require(++zeros <= 32, "corrupt-payload", "oversized Exp-Golomb code");
        }
        uint64_t v = 1;
        for (int i = 0; i < zeros; ++i)
            v = (v << 1) | static_cast<uint64_t>(get_bit());
        return static_cast<uint32_t>(v - 1);
    }

    int32_t get_se() {
        uint32_t k = get_ue();
        return (k & 1) ? static_cast<int32_t>((k + 1) / 2) : -static_cast<int32_t>(k / 2);
    }

    void align() {
        if (bit_pos_ != 0) {
            bit_pos_ = 0;
            ++byte_pos_;
        }
    }

    size_t byte_pos() const { return byte_pos_; }

private:
    const uint8_t* data_;
    size_t size_;
    size_t byte_pos_ = 0;
    int bit_pos_ = 0;
};

} // namespace vst3
