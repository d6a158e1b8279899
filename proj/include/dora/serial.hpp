#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

namespace dora {

// Canonical wire form: fixed-width big-endian integers, u32-length-prefixed
// lists, fields in declared order. See docs/wire_format.md.
class ByteWriter {
  public:
    void u8(std::uint8_t v) { buf_.push_back(v); }

    void u32(std::uint32_t v) {
        buf_.push_back(std::uint8_t(v >> 24));
        buf_.push_back(std::uint8_t(v >> 16));
        buf_.push_back(std::uint8_t(v >> 8));
        buf_.push_back(std::uint8_t(v));
    }

    void u64(std::uint64_t v) {
        u32(std::uint32_t(v >> 32));
        u32(std::uint32_t(v));
    }

    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }

    void bytes(const std::uint8_t* data, std::size_t len) {
        buf_.insert(buf_.end(), data, data + len);
    }

    void blob(const std::vector<std::uint8_t>& data) {
        u32(static_cast<std::uint32_t>(data.size()));
        bytes(data.data(), data.size());
    }

    const std::vector<std::uint8_t>& out() const { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

  private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
  public:
    ByteReader(const std::uint8_t* data, std::size_t len) : data_(data), len_(len) {}
    explicit ByteReader(const std::vector<std::uint8_t>& v) : data_(v.data()), len_(v.size()) {}

    bool ok() const { return ok_; }
    bool at_end() const { return pos_ == len_; }

    std::uint8_t u8() {
        if (!need(1)) return 0;
        return data_[pos_++];
    }

    std::uint32_t u32() {
        if (!need(4)) return 0;
        std::uint32_t v = (std::uint32_t(data_[pos_]) << 24) |
                          (std::uint32_t(data_[pos_ + 1]) << 16) |
                          (std::uint32_t(data_[pos_ + 2]) << 8) |
                          std::uint32_t(data_[pos_ + 3]);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        std::uint64_t hi = u32();
        std::uint64_t lo = u32();
        return (hi << 32) | lo;
    }

    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }

    std::vector<std::uint8_t> blob() {
        std::uint32_t n = u32();
        if (!need(n)) return {};
        std::vector<std::uint8_t> v(data_ + pos_, data_ + pos_ + n);
        pos_ += n;
        return v;
    }

  private:
    bool need(std::size_t n) {
        if (!ok_ || len_ - pos_ < n) {
            ok_ = false;
            return false;
        }
        return true;
    }

    const std::uint8_t* data_;
    std::size_t len_;
    std::size_t pos_ = 0;
    bool ok_ = true;
};

}  // namespace dora
