#include "facc/channel.hpp"

#include <stdexcept>
#include <utility>

namespace facc {

TransactionChannel::TransactionChannel(std::string name, std::size_t capacity_words)
    : name_(std::move(name)), capacity_(capacity_words) {
    if (capacity_ == 0) throw std::invalid_argument("channel capacity must be positive");
}

bool TransactionChannel::ready() const {
    std::lock_guard<std::mutex> lock(mu_);
    return !throttled_ && fifo_.size() < capacity_;
}

void TransactionChannel::set_throttle(bool throttled) {
    std::lock_guard<std::mutex> lock(mu_);
    throttled_ = throttled;
}

bool TransactionChannel::offer(std::uint32_t word, std::uint64_t timestamp) {
    std::lock_guard<std::mutex> lock(mu_);
    if (throttled_ || fifo_.size() >= capacity_) return false;
    fifo_.push_back(word);
    ++words_in_;
    if (!log_.empty() && log_.back().timestamp == timestamp)
        ++log_.back().words;
    else
        log_.push_back(TransferRecord{timestamp, 1});
    return true;
}

bool TransactionChannel::has_data() const {
    std::lock_guard<std::mutex> lock(mu_);
    return !fifo_.empty();
}

std::uint32_t TransactionChannel::take() {
    std::lock_guard<std::mutex> lock(mu_);
    if (fifo_.empty()) throw std::logic_error("take from an empty channel");
    std::uint32_t w = fifo_.front();
    fifo_.pop_front();
    ++words_out_;
    return w;
}

std::size_t TransactionChannel::pending() const {
    std::lock_guard<std::mutex> lock(mu_);
    return fifo_.size();
}

std::size_t TransactionChannel::words_in() const {
    std::lock_guard<std::mutex> lock(mu_);
    return words_in_;
}

std::size_t TransactionChannel::words_out() const {
    std::lock_guard<std::mutex> lock(mu_);
    return words_out_;
}

std::vector<TransferRecord> TransactionChannel::log() const {
    std::lock_guard<std::mutex> lock(mu_);
    return log_;
}

}  // namespace facc
