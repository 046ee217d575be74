#pragma once

#include <cstdint>
#include <string>

#include "sam/dense.hpp"

namespace sam {

class Container;

enum class TaskKind { kCopy, kRecall, kSort };

const char* to_string(TaskKind k);
TaskKind parse_task(const std::string& s);

// Inputs are word bits plus two flag channels: channel `bits` marks
// delimiters and recall pair keys, channel `bits + 1` marks the recall cue
// and carries sort priorities.
struct Episode {
  Matrix inputs;   // T x (bits + 2)
  Matrix targets;  // T x bits
  Vector mask;     // T, 1 on answer steps

  Index steps() const { return inputs.rows(); }
  Index answer_steps() const;
  bool operator==(const Episode& o) const {
    return inputs == o.inputs && targets == o.targets && mask == o.mask;
  }
};

struct TaskConfig {
  TaskKind kind = TaskKind::kCopy;
  Index level = 1;
  Index bits = 8;
  Index item_words = 1;  // words per recall key / value
  std::uint64_t seed = 1;
};

inline Index task_input_width(Index bits) { return bits + 2; }
inline Index task_output_width(Index bits) { return bits; }

// Number of keys returned by the sort task for n inputs.
Index sort_outputs(Index n);

Episode gen_copy(const TaskConfig& cfg);
Episode gen_recall(const TaskConfig& cfg);
Episode gen_sort(const TaskConfig& cfg);
Episode generate(const TaskConfig& cfg);

// Sum over masked steps of the number of bits whose output (a probability)
// lands on the wrong side of 0.5, weighted by the mask.
double bit_error(const Matrix& outputs, const Episode& ep);

Container export_episode(const Episode& ep);
Episode import_episode(const Container& c);

}  // namespace sam
