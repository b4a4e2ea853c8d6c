#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "i2vwm/core/rng.hpp"

namespace i2vwm {

// Fixed-length binary payload. Hex form uses L/4 digits, big-endian bit
// order: bit 0 is the most significant bit of the first hex digit.
class WatermarkMessage {
public:
    WatermarkMessage() = default;

    explicit WatermarkMessage(std::vector<std::uint8_t> bits, int expected_length = -1)
        : bits_(std::move(bits)) {
        for (auto b : bits_)
            if (b != 0 && b != 1) throw std::invalid_argument("WatermarkMessage: bits must be 0/1");
        if (expected_length >= 0 && int(bits_.size()) != expected_length)
            throw std::invalid_argument("WatermarkMessage: length " + std::to_string(bits_.size()) +
                                        " does not match configured length " +
                                        std::to_string(expected_length));
        if (bits_.empty()) throw std::invalid_argument("WatermarkMessage: empty payload");
    }

    static WatermarkMessage random(int length, Rng& rng) {
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(length));
        for (auto& b : bits) b = std::uint8_t(rng.next_u64() & 1u);
        return WatermarkMessage(std::move(bits));
    }

    static WatermarkMessage from_hex(const std::string& hex, int expected_length = -1) {
        if (hex.empty()) throw std::invalid_argument("WatermarkMessage: empty hex string");
        std::vector<std::uint8_t> bits;
        bits.reserve(hex.size() * 4);
        for (char ch : hex) {
            int v;
            if (ch >= '0' && ch <= '9') v = ch - '0';
            else if (ch >= 'a' && ch <= 'f') v = ch - 'a' + 10;
            else if (ch >= 'A' && ch <= 'F') v = ch - 'A' + 10;
            else throw std::invalid_argument(std::string("WatermarkMessage: bad hex char '") + ch + "'");
            for (int i = 3; i >= 0; --i) bits.push_back(std::uint8_t((v >> i) & 1));
        }
        return WatermarkMessage(std::move(bits), expected_length);
    }

    std::string to_hex() const {
        if (bits_.size() % 4 != 0)
            throw std::logic_error("WatermarkMessage: hex form requires length divisible by 4");
        static const char* digits = "0123456789abcdef";
        std::string out;
        out.reserve(bits_.size() / 4);
        for (std::size_t i = 0; i < bits_.size(); i += 4) {
            const int v = (bits_[i] << 3) | (bits_[i + 1] << 2) | (bits_[i + 2] << 1) | bits_[i + 3];
            out.push_back(digits[v]);
        }
        return out;
    }

    std::size_t size() const { return bits_.size(); }
    std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
    const std::vector<std::uint8_t>& bits() const { return bits_; }

    bool operator==(const WatermarkMessage& o) const { return bits_ == o.bits_; }
    bool operator!=(const WatermarkMessage& o) const { return bits_ != o.bits_; }

private:
    std::vector<std::uint8_t> bits_;
};

} // namespace i2vwm
