#pragma once

#include <cstdint>
#include <deque>
#include <mutex>
#include <string>
#include <vector>

namespace facc {

struct TransferRecord {
    std::uint64_t timestamp = 0;
    std::size_t words = 0;
};

// One direction of the host<->engine transport: a 32-bit word pipe fronted
// by a consumer-side buffer. ready mirrors the space left (and an explicit
// throttle used to model a busy consumer); an unready channel refuses the
// word and the producer must retry later. Accepted words move in order,
// exactly once. Guarded by a mutex so host and engine may pump from two
// threads.
class TransactionChannel {
public:
    TransactionChannel(std::string name, std::size_t capacity_words);

    const std::string& name() const { return name_; }
    std::size_t capacity() const { return capacity_; }

    bool ready() const;
    void set_throttle(bool throttled);

    // producer side; true when the word was accepted at `timestamp`
    bool offer(std::uint32_t word, std::uint64_t timestamp);

    // consumer side
    bool has_data() const;
    std::uint32_t take();
    std::size_t pending() const;

    std::size_t words_in() const;
    std::size_t words_out() const;
    std::vector<TransferRecord> log() const;

private:
    mutable std::mutex mu_;
    std::string name_;
    std::size_t capacity_;
    bool throttled_ = false;
    std::deque<std::uint32_t> fifo_;
    std::size_t words_in_ = 0;
    std::size_t words_out_ = 0;
    std::vector<TransferRecord> log_;
};

}  // namespace facc
