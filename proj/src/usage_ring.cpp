#include "sam/usage_ring.hpp"

#include <algorithm>

#include "sam/error.hpp"

namespace sam {

UsageRing::UsageRing(Index slots) {
  require(slots >= 1, "UsageRing: needs at least one slot");
  next_.resize(static_cast<std::size_t>(slots));
  prev_.resize(static_cast<std::size_t>(slots));
  for (Index s = 0; s < slots; ++s) {
    next_[static_cast<std::size_t>(s)] = (s + 1) % slots;
    prev_[static_cast<std::size_t>(s)] = (s + slots - 1) % slots;
  }
  head_ = 0;
}

void UsageRing::unlink(Index slot) {
  const Index p = prev(slot);
  const Index n = next(slot);
  next_[static_cast<std::size_t>(p)] = n;
  prev_[static_cast<std::size_t>(n)] = p;
}

void UsageRing::link_before(Index slot, Index at) {
  const Index p = prev(at);
  next_[static_cast<std::size_t>(p)] = slot;
  prev_[static_cast<std::size_t>(slot)] = p;
  next_[static_cast<std::size_t>(slot)] = at;
  prev_[static_cast<std::size_t>(at)] = slot;
}

UsageRing::Undo UsageRing::touch(Index slot) {
  require(slot >= 0 && slot < size(), "UsageRing::touch: slot out of range");
  Undo u{slot, prev(slot), next(slot), head_};
  if (slot == head_) {
    head_ = next(head_);
    return u;
  }
  unlink(slot);
  link_before(slot, head_);
  return u;
}

void UsageRing::undo(const Undo& u) {
  if (u.slot == u.head) {
    head_ = u.head;
    return;
  }
  unlink(u.slot);
  link_before(u.slot, u.next);
  head_ = u.head;
}

std::vector<Index> UsageRing::order() const { return front(size()); }

std::vector<Index> UsageRing::front(Index count) const {
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(std::min(count, size())));
  Index s = head_;
  for (Index i = 0; i < std::min(count, size()); ++i) {
    out.push_back(s);
    s = next(s);
  }
  return out;
}

bool UsageRing::check_invariants() const {
  const Index n = size();
  if (n == 0) return true;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  Index s = head_;
  for (Index i = 0; i < n; ++i) {
    if (s < 0 || s >= n || seen[static_cast<std::size_t>(s)]) return false;
    seen[static_cast<std::size_t>(s)] = 1;
    if (prev(next(s)) != s) return false;
    s = next(s);
  }
  return s == head_;
}

void UsageRing::assign_order(const std::vector<Index>& order) {
  const Index n = static_cast<Index>(order.size());
  require(n == size(), "UsageRing::assign_order: wrong slot count");
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (Index s : order) {
    require(s >= 0 && s < n && !seen[static_cast<std::size_t>(s)],
            "UsageRing::assign_order: not a permutation");
    seen[static_cast<std::size_t>(s)] = 1;
  }
  for (Index i = 0; i < n; ++i) {
    const Index s = order[static_cast<std::size_t>(i)];
    next_[static_cast<std::size_t>(s)] = order[static_cast<std::size_t>((i + 1) % n)];
    prev_[static_cast<std::size_t>(s)] = order[static_cast<std::size_t>((i + n - 1) % n)];
  }
  head_ = order.front();
}

}  // namespace sam
