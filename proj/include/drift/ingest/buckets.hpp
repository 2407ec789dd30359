#pragma once

#include <cstddef>
#include <vector>

#include "drift/common.hpp"
#include "drift/ingest/posts.hpp"

namespace drift::ingest {

/// Posts falling on one local calendar day. `embedding_rows` holds the
/// post's embedding row when joined, otherwise its position in the post list.
struct DailyBucket {
  Date date;
  std::size_t post_count = 0;
  std::vector<std::size_t> embedding_rows;
};

/// One bucket per calendar day from the first to the last post, inclusive.
/// Days without posts are kept with a zero count.
inline std::vector<DailyBucket> bucket_daily(const std::vector<PostRecord>& posts, const Timezone& tz) {
  if (posts.empty()) throw Error("no posts");
  Date first = tz.local_date(posts.front().timestamp);
  Date last = first;
  for (const auto& p : posts) {
    const Date d = tz.local_date(p.timestamp);
    first = std::min(first, d);
    last = std::max(last, d);
  }
  std::vector<DailyBucket> buckets(static_cast<std::size_t>(last - first) + 1);
  for (std::size_t i = 0; i < buckets.size(); ++i) buckets[i].date = first + static_cast<long>(i);
  for (std::size_t i = 0; i < posts.size(); ++i) {
    auto& b = buckets[static_cast<std::size_t>(tz.local_date(posts[i].timestamp) - first)];
    b.embedding_rows.push_back(posts[i].embedding_row.value_or(i));
    ++b.post_count;
  }
  return buckets;
}

inline std::vector<Date> bucket_dates(const std::vector<DailyBucket>& buckets) {
  std::vector<Date> out;
  out.reserve(buckets.size());
  for (const auto& b : buckets) out.push_back(b.date);
  return out;
}

inline Series bucket_counts(const std::vector<DailyBucket>& buckets) {
  Series out;
  out.reserve(buckets.size());
  for (const auto& b : buckets) out.push_back(static_cast<double>(b.post_count));
  return out;
}

}  // namespace drift::ingest
