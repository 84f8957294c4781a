// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsm/cursor.hpp"

namespace kvlsm::lsm {

MergingCursor::MergingCursor(std::vector<std::unique_ptr<Cursor>> newest_first)
    : inputs_(std::move(newest_first))
{
  for (int i = 0; i < static_cast<int>(inputs_.size()); ++i) {
    push(i);
  }
  settle();
}

void MergingCursor::push(int rank)
{
  if (inputs_[rank]->valid()) {
    heap_.push(HeapItem{inputs_[rank]->key(), rank});
  }
}

void MergingCursor::settle()
{
  if (heap_.empty()) {
    current_ = -1;
    return;
  }
  current_ = heap_.top().rank;
}

void MergingCursor::next()
{
  // Pop the current key from every input holding it; older duplicates are
  // shadowed by the one just produced.
  const std::string key(inputs_[current_]->key());
  while (!heap_.empty() && heap_.top().key == key) {
    const int rank = heap_.top().rank;
    heap_.pop();
    inputs_[rank]->next();
    push(rank);
  }
  settle();
}

}  // namespace kvlsm::lsm
