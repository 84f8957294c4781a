// Copyright (C) 2026 The kvlsm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <queue>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kvlsm/lsm_index.hpp"

namespace kvlsm::lsm {

/// Forward iterator over key-ordered (key, entry) pairs.
class Cursor {
 public:
  virtual ~Cursor() = default;
  virtual bool valid() const = 0;
  virtual std::string_view key() const = 0;
  virtual const IndexEntry& entry() const = 0;
  virtual void next() = 0;
};

class VectorCursor final : public Cursor {
 public:
  explicit VectorCursor(std::vector<std::pair<std::string, IndexEntry>> items)
      : items_(std::move(items))
  {
  }

  bool valid() const override { return pos_ < items_.size(); }
  std::string_view key() const override { return items_[pos_].first; }
  const IndexEntry& entry() const override { return items_[pos_].second; }
  void next() override { ++pos_; }

 private:
  std::vector<std::pair<std::string, IndexEntry>> items_;
  std::size_t pos_ = 0;
};

/// K-way merge of cursors given newest first. For a key present in several
/// inputs only the newest version is produced.
class MergingCursor final : public Cursor {
 public:
  explicit MergingCursor(std::vector<std::unique_ptr<Cursor>> newest_first);

  bool valid() const override { return current_ >= 0; }
  std::string_view key() const override { return inputs_[current_]->key(); }
  const IndexEntry& entry() const override { return inputs_[current_]->entry(); }
  void next() override;

 private:
  struct HeapItem {
    std::string_view key;
    int rank;
  };
  struct Greater {
    bool operator()(const HeapItem& a, const HeapItem& b) const
    {
      if (a.key != b.key) {
        return a.key > b.key;
      }
      return a.rank > b.rank;
    }
  };

  void push(int rank);
  void settle();

  std::vector<std::unique_ptr<Cursor>> inputs_;
  std::priority_queue<HeapItem, std::vector<HeapItem>, Greater> heap_;
  int current_ = -1;
};

}  // namespace kvlsm::lsm
