#include "facc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "facc/errors.hpp"
#include "facc/fp16.hpp"

namespace facc {

RefTensor to_ref(const Tensor& t) {
    RefTensor r(t.w, t.h, t.c);
    for (std::size_t i = 0; i < t.data.size(); ++i) r.data[i] = half_to_real(t.data[i]);
    return r;
}

Tensor to_half_tensor(const RefTensor& t, bool flush_subnormals) {
    Tensor r(t.w, t.h, t.c);
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        r.data[i] = real_to_half(t.data[i], flush_subnormals);
    }
    return r;
}

RefTensor pad_surface_ref(const RefTensor& t, Pad4 p) {
    if (p.top == 0 && p.left == 0 && p.bottom == 0 && p.right == 0) return t;
    RefTensor out(t.w + p.left + p.right, t.h + p.top + p.bottom, t.c);
    for (std::size_t y = 0; y < t.h; ++y) {
        for (std::size_t x = 0; x < t.w; ++x) {
            for (std::size_t ch = 0; ch < t.c; ++ch) {
                out.at(x + p.left, y + p.top, ch) = t.at(x, y, ch);
            }
        }
    }
    return out;
}

namespace {

void check_filters(const RefTensor& padded, const std::vector<std::vector<double>>& filters,
                   const std::vector<double>& biases, std::size_t k) {
    if (filters.empty()) throw GeometryError("convolution needs at least one filter");
    if (biases.size() != filters.size()) {
        throw GeometryError("bias count does not match filter count");
    }
    for (const auto& f : filters) {
        if (f.size() != k * k * padded.c) {
            throw GeometryError("filter volume does not match k*k*channels");
        }
    }
}

}  // namespace

RefTensor conv_ref(const RefTensor& input, const std::vector<std::vector<double>>& filters,
                   const std::vector<double>& biases, std::size_t k, std::size_t s, Pad4 p) {
    RefTensor padded = pad_surface_ref(input, p);
    check_filters(padded, filters, biases, k);
    std::size_t out_w = output_side_padded(padded.w, k, s);
    std::size_t out_h = output_side_padded(padded.h, k, s);
    RefTensor out(out_w, out_h, filters.size());
    for (std::size_t ho = 0; ho < out_h; ++ho) {
        for (std::size_t wo = 0; wo < out_w; ++wo) {
            for (std::size_t n = 0; n < filters.size(); ++n) {
                const auto& f = filters[n];
                double acc = biases[n];
                for (std::size_t ch = 0; ch < padded.c; ++ch) {
                    for (std::size_t kh = 0; kh < k; ++kh) {
                        for (std::size_t kw = 0; kw < k; ++kw) {
                            acc += f[(kh * k + kw) * padded.c + ch] *
                                   padded.at(wo * s + kw, ho * s + kh, ch);
                        }
                    }
                }
                out.at(wo, ho, n) = acc;
            }
        }
    }
    return out;
}

RefTensor maxpool_ref(const RefTensor& input, std::size_t k, std::size_t s) {
    std::size_t out_w = output_side_padded(input.w, k, s);
    std::size_t out_h = output_side_padded(input.h, k, s);
    RefTensor out(out_w, out_h, input.c);
    for (std::size_t ho = 0; ho < out_h; ++ho) {
        for (std::size_t wo = 0; wo < out_w; ++wo) {
            for (std::size_t ch = 0; ch < input.c; ++ch) {
                double best = input.at(wo * s, ho * s, ch);
                for (std::size_t kh = 0; kh < k; ++kh) {
                    for (std::size_t kw = 0; kw < k; ++kw) {
                        best = std::max(best, input.at(wo * s + kw, ho * s + kh, ch));
                    }
                }
                out.at(wo, ho, ch) = best;
            }
        }
    }
    return out;
}

RefTensor avgpool_ref(const RefTensor& input, std::size_t k, std::size_t s) {
    std::size_t out_w = output_side_padded(input.w, k, s);
    std::size_t out_h = output_side_padded(input.h, k, s);
    RefTensor out(out_w, out_h, input.c);
    double denom = static_cast<double>(k * k);
    for (std::size_t ho = 0; ho < out_h; ++ho) {
        for (std::size_t wo = 0; wo < out_w; ++wo) {
            for (std::size_t ch = 0; ch < input.c; ++ch) {
                double acc = 0.0;
                for (std::size_t kh = 0; kh < k; ++kh) {
                    for (std::size_t kw = 0; kw < k; ++kw) {
                        acc += input.at(wo * s + kw, ho * s + kh, ch);
                    }
                }
                out.at(wo, ho, ch) = acc / denom;
            }
        }
    }
    return out;
}

RefTensor relu_ref(const RefTensor& input) {
    RefTensor out(input.w, input.h, input.c);
    for (std::size_t i = 0; i < input.data.size(); ++i) {
        double v = input.data[i];
        out.data[i] = v > 0.0 ? v : 0.0;  // -0 maps to +0
    }
    return out;
}

std::vector<double> softmax_ref(const std::vector<double>& logits) {
    if (logits.empty()) return {};
    double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

RefTensor conv_mec(const RefTensor& input, const std::vector<std::vector<double>>& filters,
                   const std::vector<double>& biases, std::size_t k, std::size_t s, Pad4 p,
                   MecTrace* trace) {
    RefTensor padded = pad_surface_ref(input, p);
    check_filters(padded, filters, biases, k);
    std::size_t out_w = output_side_padded(padded.w, k, s);
    std::size_t out_h = output_side_padded(padded.h, k, s);
    std::size_t n_filters = filters.size();
    RefTensor out(out_w, out_h, n_filters);

    if (trace) {
        trace->provisioned_slots = k;
        trace->peak_occupied = 0;
        trace->slot_masks.assign(padded.w, 0);
        trace->fetch_counts.assign(padded.data.size(), 0);
        trace->column_windows = covering_window_counts(padded.w, k, s);
        // Count the indices two width-neighbor windows share, per channel plane.
        std::size_t overlap = 0;
        if (out_w >= 2) {
            for (std::size_t kh = 0; kh < k; ++kh) {
                for (std::size_t x = s; x < k; ++x) ++overlap;
            }
        }
        trace->neighbor_overlap = overlap;
    }

    // One in-flight window per slot; accumulators cover every output row and
    // filter of that window's output column so a column is consumed whole.
    struct Slot {
        std::size_t wo = 0;
        std::vector<double> acc;  // [n * out_h + ho]
    };
    std::vector<std::optional<Slot>> slots(k);

    for (std::size_t x = 0; x < padded.w; ++x) {
        if (x % s == 0 && x / s < out_w) {
            std::size_t wo = x / s;
            std::size_t free_slot = k;
            for (std::size_t i = 0; i < k; ++i) {
                if (!slots[i]) {
                    free_slot = i;
                    break;
                }
            }
            if (free_slot == k) throw GeometryError("streaming schedule ran out of slots");
            Slot fresh;
            fresh.wo = wo;
            fresh.acc.assign(n_filters * out_h, 0.0);
            for (std::size_t n = 0; n < n_filters; ++n) {
                for (std::size_t ho = 0; ho < out_h; ++ho) fresh.acc[n * out_h + ho] = biases[n];
            }
            slots[free_slot] = std::move(fresh);
        }

        std::uint64_t mask = 0;
        std::size_t occupied = 0;
        for (std::size_t i = 0; i < k; ++i) {
            if (!slots[i]) continue;
            std::size_t wo = slots[i]->wo;
            if (x < wo * s || x >= wo * s + k) continue;
            mask |= std::uint64_t{1} << i;
            ++occupied;
            std::size_t kw = x - wo * s;
            for (std::size_t n = 0; n < n_filters; ++n) {
                const auto& f = filters[n];
                for (std::size_t ho = 0; ho < out_h; ++ho) {
                    double acc = slots[i]->acc[n * out_h + ho];
                    for (std::size_t kh = 0; kh < k; ++kh) {
                        for (std::size_t ch = 0; ch < padded.c; ++ch) {
                            acc += f[(kh * k + kw) * padded.c + ch] *
                                   padded.at(x, ho * s + kh, ch);
                        }
                    }
                    slots[i]->acc[n * out_h + ho] = acc;
                }
            }
        }

        if (trace) {
            trace->slot_masks[x] = mask;
            trace->peak_occupied = std::max(trace->peak_occupied, occupied);
            if (mask != 0) {
                for (std::size_t y = 0; y < padded.h; ++y) {
                    for (std::size_t ch = 0; ch < padded.c; ++ch) {
                        ++trace->fetch_counts[padded.index(x, y, ch)];
                    }
                }
            }
        }

        for (std::size_t i = 0; i < k; ++i) {
            if (slots[i] && slots[i]->wo * s + k - 1 == x) {
                for (std::size_t n = 0; n < n_filters; ++n) {
                    for (std::size_t ho = 0; ho < out_h; ++ho) {
                        out.at(slots[i]->wo, ho, n) = slots[i]->acc[n * out_h + ho];
                    }
                }
                slots[i].reset();
            }
        }
    }
    return out;
}

std::vector<std::size_t> covering_window_counts(std::size_t side, std::size_t k, std::size_t s) {
    std::size_t out = output_side_padded(side, k, s);
    std::vector<std::size_t> counts(side, 0);
    for (std::size_t wo = 0; wo < out; ++wo) {
        for (std::size_t x = wo * s; x < wo * s + k; ++x) ++counts[x];
    }
    return counts;
}

std::vector<std::size_t> im2col_fetch_counts(std::size_t w, std::size_t h,
                                             std::size_t k, std::size_t s) {
    std::size_t out_w = output_side_padded(w, k, s);
    std::size_t out_h = output_side_padded(h, k, s);
    std::vector<std::size_t> counts(w * h, 0);
    for (std::size_t ho = 0; ho < out_h; ++ho) {
        for (std::size_t wo = 0; wo < out_w; ++wo) {
            for (std::size_t kh = 0; kh < k; ++kh) {
                for (std::size_t kw = 0; kw < k; ++kw) {
                    ++counts[(ho * s + kh) * w + wo * s + kw];
                }
            }
        }
    }
    return counts;
}

std::vector<ComparatorStage> bitonic_network(std::size_t n) {
    if (n == 0 || (n & (n - 1)) != 0) {
        throw GeometryError("total number of elements must be an integer power of 2");
    }
    std::vector<ComparatorStage> stages;
    for (std::size_t block = 2; block <= n; block *= 2) {
        for (std::size_t dist = block / 2; dist > 0; dist /= 2) {
            ComparatorStage stage;
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t j = i ^ dist;
                if (j > i) stage.pairs.push_back({i, j, (i & block) == 0});
            }
            stages.push_back(std::move(stage));
        }
    }
    return stages;
}

std::vector<double> bitonic_sort(std::vector<double> values, bool descending) {
    auto stages = bitonic_network(values.size());
    for (const auto& stage : stages) {
        for (const auto& cmp : stage.pairs) {
            bool swap = cmp.ascending ? values[cmp.lo] > values[cmp.hi]
                                      : values[cmp.lo] < values[cmp.hi];
            if (swap) std::swap(values[cmp.lo], values[cmp.hi]);
        }
    }
    if (descending) std::reverse(values.begin(), values.end());
    return values;
}

std::vector<std::size_t> AccumulationSchedule::fetch_counts() const {
    std::vector<std::size_t> out(cycles.size());
    for (std::size_t i = 0; i < cycles.size(); ++i) out[i] = cycles[i].fetched;
    // The reported sequence ends at the last fetch; fold-only tail cycles
    // stay visible in `cycles` but not here.
    while (!out.empty() && out.back() == 0) out.pop_back();
    return out;
}

double pipeline_accumulate(const std::vector<double>& values, std::size_t adders,
                           AccumulationSchedule* schedule) {
    if (adders == 0) throw std::invalid_argument("accumulation needs at least one adder");
    if (schedule) {
        schedule->adders = adders;
        schedule->cycles.clear();
    }
    if (values.empty()) return 0.0;

    std::size_t next = 0;
    std::size_t rem = values.size();
    auto fetch = [&](std::size_t count) {
        next += count;
        rem -= count;
    };
    auto record = [&](std::size_t fetched, std::size_t adds) {
        if (schedule) schedule->cycles.push_back({fetched, adds});
    };

    // Opening cycle: fill every adder with a fresh operand pair.
    std::vector<double> partials;
    std::size_t first = std::min(2 * adders, rem);
    std::size_t base = next;
    fetch(first);
    for (std::size_t i = 0; i + 1 < first; i += 2) {
        partials.push_back(values[base + i] + values[base + i + 1]);
    }
    if (first % 2 != 0) partials.push_back(values[base + first - 1]);
    record(first, first / 2);

    // Accumulation rounds: each partial absorbs one fresh value per cycle.
    while (rem > 0 && rem >= partials.size()) {
        std::size_t count = partials.size();
        base = next;
        fetch(count);
        for (std::size_t i = 0; i < count; ++i) partials[i] += values[base + i];
        record(count, count);
    }

    // Combining rounds: fold partial pairs, idle adders pair up the tail.
    while (partials.size() > 1 || rem > 0) {
        std::size_t p = partials.size();
        std::size_t fetched = 0;
        std::size_t adds = 0;

        std::vector<double> folded;
        for (std::size_t i = 0; i + 1 < p; i += 2) {
            folded.push_back(partials[i] + partials[i + 1]);
            ++adds;
        }
        if (p % 2 != 0) folded.push_back(partials[p - 1]);

        if (rem >= 2) {
            fetched = 2 * ((rem + 2) / 4);
            base = next;
            fetch(fetched);
            for (std::size_t i = 0; i + 1 < fetched; i += 2) {
                folded.push_back(values[base + i] + values[base + i + 1]);
                ++adds;
            }
        } else if (rem == 1 && p == 2) {
            fetched = 1;
            base = next;
            fetch(1);
            folded.push_back(values[base]);
        }

        partials = std::move(folded);
        record(fetched, adds);
    }

    return partials[0];
}

}  // namespace facc
