#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "thg/tensor.hpp"

namespace thg {

/// Ordered collection of named tensors (weights, biases, optimizer slots).
/// Order is fixed at construction and defines the checkpoint layout.
class ParamSet {
  public:
    struct Entry {
        std::string name;
        Tensor2 value;
    };

    void add(std::string name, Tensor2 value) {
        if (has(name)) throw std::invalid_argument("ParamSet: duplicate name " + name);
        entries_.push_back({std::move(name), std::move(value)});
    }

    bool has(const std::string& name) const { return find_index(name) >= 0; }

    Tensor2& get(const std::string& name) {
        int i = find_index(name);
        if (i < 0) throw std::out_of_range("ParamSet: missing " + name);
        return entries_[static_cast<size_t>(i)].value;
    }
    const Tensor2& get(const std::string& name) const {
        int i = find_index(name);
        if (i < 0) throw std::out_of_range("ParamSet: missing " + name);
        return entries_[static_cast<size_t>(i)].value;
    }

    size_t size() const { return entries_.size(); }
    Entry& operator[](size_t i) { return entries_[i]; }
    const Entry& operator[](size_t i) const { return entries_[i]; }

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

  private:
    int find_index(const std::string& name) const {
        for (size_t i = 0; i < entries_.size(); ++i)
            if (entries_[i].name == name) return static_cast<int>(i);
        return -1;
    }

    std::vector<Entry> entries_;
};

}  // namespace thg
