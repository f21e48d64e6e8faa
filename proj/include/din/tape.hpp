#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "din/tensor.hpp"

namespace din {

// Recorded computation graph for reverse-mode differentiation.
// Nodes are appended in execution order, so the list is already a
// topological order; backward walks it once in reverse. Each node's
// closure reads the output's grad buffer and accumulates into the
// inputs' buffers. A tape is owned by exactly one forward/backward pass.
class Tape {
 public:
  struct Node {
    Tensor output;
    std::function<void()> backward;
  };

  void record(Tensor output, std::function<void()> fn) {
    nodes_.push_back(Node{std::move(output), std::move(fn)});
  }

  size_t size() const { return nodes_.size(); }

  void backward(Tensor loss) {
    check(loss.defined() && loss.numel() == 1, "backward requires a scalar output");
    bool on_tape = false;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->output.id() == loss.id()) {
        on_tape = true;
        break;
      }
    }
    check(on_tape, "backward target was not produced on this tape");
    loss.grad_buffer()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->output.has_grad()) it->backward();
    }
  }

  void clear() { nodes_.clear(); }

  static Tape* current() { return current_slot(); }

 private:
  friend class TapeScope;
  static Tape*& current_slot() {
    thread_local Tape* active = nullptr;
    return active;
  }

  std::vector<Node> nodes_;
};

// RAII activation of a tape for the current thread. Ops record onto the
// active tape whenever one of their inputs requires a gradient.
class TapeScope {
 public:
  explicit TapeScope(Tape& t) : prev_(Tape::current_slot()) { Tape::current_slot() = &t; }
  ~TapeScope() { Tape::current_slot() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

namespace detail {

inline bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::current()) return false;
  for (const Tensor* t : inputs)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

}  // namespace detail

}  // namespace din
