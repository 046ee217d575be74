#pragma once

#include <vector>

#include "sam/dense.hpp"

namespace sam {

// Circular doubly-linked order over slot indices. The head is the least
// recently accessed slot and prev(head) the most recent one; touching a slot
// moves it to the back in O(1).
class UsageRing {
 public:
  struct Undo {
    Index slot;
    Index prev;
    Index next;
    Index head;
  };

  UsageRing() = default;
  explicit UsageRing(Index slots);

  Index size() const { return static_cast<Index>(next_.size()); }
  Index head() const { return head_; }
  Index next(Index slot) const { return next_[static_cast<std::size_t>(slot)]; }
  Index prev(Index slot) const { return prev_[static_cast<std::size_t>(slot)]; }

  // Marks `slot` as the most recently accessed.
  Undo touch(Index slot);
  // Reverses a touch; undos must be replayed in reverse order.
  void undo(const Undo& u);

  // Slot indices from least to most recently accessed.
  std::vector<Index> order() const;
  // First `count` slots from the head.
  std::vector<Index> front(Index count) const;

  bool check_invariants() const;

  const std::vector<Index>& next_links() const { return next_; }
  const std::vector<Index>& prev_links() const { return prev_; }
  // Rebuilds the links from an explicit order (least recent first).
  void assign_order(const std::vector<Index>& order);

 private:
  void unlink(Index slot);
  void link_before(Index slot, Index at);

  std::vector<Index> next_;
  std::vector<Index> prev_;
  Index head_ = 0;
};

}  // namespace sam
