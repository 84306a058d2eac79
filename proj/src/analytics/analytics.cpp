// Copyright 2026 The Polyframe Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "polyframe/analytics/analytics.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "polyframe/common/csv.hpp"
#include "polyframe/common/error.hpp"

namespace polyframe {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string trimmed(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

std::string month_label(int year, int month) { return fmt::format("{:04d}-{:02d}", year, month); }

}  // namespace

Party party_from_string(std::string_view s) {
  auto v = lower(trimmed(s));
  if (v == "d" || v == "dem" || v == "democrat" || v == "democratic") return Party::D;
  if (v == "r" || v == "rep" || v == "republican") return Party::R;
  if (v == "i" || v == "ind" || v == "independent") return Party::I;
  return Party::Other;
}

std::string_view to_string(Party p) {
  switch (p) {
    case Party::D: return "D";
    case Party::R: return "R";
    case Party::I: return "I";
    case Party::Other: break;
  }
  return "other";
}

void MetadataTable::add(SenatorMetadata m) {
  if (m.author_id.empty()) throw DataError("metadata row with empty author_id");
  auto id = m.author_id;
  if (!rows_.emplace(id, std::move(m)).second) throw DataError(fmt::format("duplicate author_id {}", id));
}

const SenatorMetadata* MetadataTable::find(std::string_view author_id) const {
  auto it = rows_.find(author_id);
  return it == rows_.end() ? nullptr : &it->second;
}

MetadataTable load_metadata(std::istream& in) {
  csv::Table table(in);
  table.require({"author_id", "party", "gender", "race", "state"});
  const auto id = *table.column("author_id");
  const auto party = *table.column("party");
  const auto gender = *table.column("gender");
  const auto race = *table.column("race");
  const auto state = *table.column("state");
  MetadataTable out;
  csv::Record rec;
  while (table.next(rec)) {
    if (rec.fields.size() == 1 && trimmed(rec.fields[0]).empty()) continue;
    if (rec.fields.size() < table.header().size()) {
      throw DataError(fmt::format("metadata line {}: expected {} fields, got {}", rec.line, table.header().size(),
                                  rec.fields.size()));
    }
    SenatorMetadata m{trimmed(rec.fields[id]), party_from_string(rec.fields[party]), trimmed(rec.fields[gender]),
                      trimmed(rec.fields[race]), trimmed(rec.fields[state])};
    try {
      out.add(std::move(m));
    } catch (const DataError& ex) {
      throw DataError(fmt::format("metadata line {}: {}", rec.line, ex.what()));
    }
  }
  return out;
}

MetadataTable load_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open metadata file {}", path.string()));
  return load_metadata(in);
}

std::vector<LabeledTweet> read_labeled_tweets(std::istream& in) {
  csv::Table table(in);
  table.require({"tweet_id", "author_id", "created_at", "label"});
  const auto id = *table.column("tweet_id");
  const auto author = *table.column("author_id");
  const auto date = *table.column("created_at");
  const auto label = *table.column("label");
  const auto text = table.column("text");
  std::vector<LabeledTweet> out;
  csv::Record rec;
  while (table.next(rec)) {
    if (rec.fields.size() < table.header().size()) {
      throw DataError(fmt::format("line {}: expected {} fields", rec.line, table.header().size()));
    }
    LabeledTweet t;
    t.tweet.id = rec.fields[id];
    t.tweet.author_id = rec.fields[author];
    if (text) t.tweet.text = rec.fields[*text];
    if (auto d = parse_date(rec.fields[date])) t.tweet.posted_at = *d;
    std::optional<Category> c;
    try {
      c = category_from_code(std::stoi(rec.fields[label]));
    } catch (const std::exception&) {
    }
    if (!c) throw DataError(fmt::format("line {}: label '{}' is not 1, 2 or 3", rec.line, rec.fields[label]));
    t.label = *c;
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<LabeledTweet> read_labeled_tweets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open labeled corpus {}", path.string()));
  return read_labeled_tweets(in);
}

std::optional<GroupBy> group_by_from_string(std::string_view s) {
  if (s == "party") return GroupBy::Party;
  if (s == "gender") return GroupBy::Gender;
  if (s == "race") return GroupBy::Race;
  if (s == "none") return GroupBy::None;
  return std::nullopt;
}

std::string_view to_string(GroupBy g) {
  switch (g) {
    case GroupBy::Party: return "party";
    case GroupBy::Gender: return "gender";
    case GroupBy::Race: return "race";
    case GroupBy::None: break;
  }
  return "none";
}

double MonthlyAggregate::proportion(Category c) const {
  if (total == 0) return 0.0;
  return static_cast<double>(counts[index_of(c)]) / static_cast<double>(total);
}

std::size_t MonthSpan::months() const {
  int n = month_ordinal(last_year, last_month) - month_ordinal(first_year, first_month) + 1;
  return n > 0 ? static_cast<std::size_t>(n) : 0;
}

AggregateResult aggregate_monthly(std::span<const LabeledTweet> tweets, const MetadataTable& metadata,
                                  GroupBy group_by, std::optional<MonthSpan> span) {
  AggregateResult out;
  out.group_by = group_by;

  struct Keyed {
    int ordinal;
    std::string group;
    Category label;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(tweets.size());
  const int lo = span ? month_ordinal(span->first_year, span->first_month) : 0;
  const int hi = span ? month_ordinal(span->last_year, span->last_month) : 0;
  for (const auto& t : tweets) {
    const auto& d = t.tweet.posted_at;
    if (d.year <= 0 || d.month < 1 || d.month > 12) {
      spdlog::warn("tweet {}: no usable year-month, excluded from monthly aggregates", t.tweet.id);
      out.excluded.push_back(t.tweet.id);
      continue;
    }
    int ord = month_ordinal(d.year, d.month);
    if (span && (ord < lo || ord > hi)) {
      spdlog::warn("tweet {}: {} outside the aggregation span, excluded", t.tweet.id, format_date(d));
      out.excluded.push_back(t.tweet.id);
      continue;
    }
    std::string group;
    if (group_by == GroupBy::None) {
      group = kAllGroup;
    } else if (const auto* m = metadata.find(t.tweet.author_id)) {
      switch (group_by) {
        case GroupBy::Party: group = to_string(m->party); break;
        case GroupBy::Gender: group = m->gender; break;
        case GroupBy::Race: group = m->race; break;
        case GroupBy::None: break;
      }
      if (group.empty()) group = kUnknownGroup;
    } else {
      group = kUnknownGroup;
      out.unknown_authors.insert(t.tweet.author_id);
    }
    keyed.push_back({ord, std::move(group), t.label});
  }
  for (const auto& a : out.unknown_authors) spdlog::warn("author {} missing from metadata, grouped as unknown", a);

  if (span) {
    out.span = *span;
  } else if (!keyed.empty()) {
    auto [mn, mx] = std::minmax_element(keyed.begin(), keyed.end(),
                                        [](const Keyed& a, const Keyed& b) { return a.ordinal < b.ordinal; });
    out.span = {mn->ordinal / 12, mn->ordinal % 12 + 1, mx->ordinal / 12, mx->ordinal % 12 + 1};
  }
  if (keyed.empty()) return out;

  std::set<std::string> groups;
  for (const auto& k : keyed) groups.insert(k.group);
  out.groups.assign(groups.begin(), groups.end());
  const std::size_t n_months = out.span.months();
  const int first = month_ordinal(out.span.first_year, out.span.first_month);

  out.rows.resize(n_months * out.groups.size());
  for (std::size_t m = 0; m < n_months; ++m) {
    int ord = first + static_cast<int>(m);
    for (std::size_t g = 0; g < out.groups.size(); ++g) {
      auto& row = out.rows[m * out.groups.size() + g];
      row.year = ord / 12;
      row.month = ord % 12 + 1;
      row.group = out.groups[g];
    }
  }
  for (const auto& k : keyed) {
    auto g = static_cast<std::size_t>(
        std::lower_bound(out.groups.begin(), out.groups.end(), k.group) - out.groups.begin());
    auto& row = out.rows[static_cast<std::size_t>(k.ordinal - first) * out.groups.size() + g];
    ++row.counts[index_of(k.label)];
    ++row.total;
    ++out.counted;
  }
  return out;
}

void write_counts_csv(std::ostream& out, const AggregateResult& agg) {
  csv::write_row(out, {"month", "group", "total"});
  for (const auto& r : agg.rows) csv::write_row(out, {month_label(r.year, r.month), r.group, std::to_string(r.total)});
}

void write_labels_csv(std::ostream& out, const AggregateResult& agg) {
  csv::write_row(out, {"month", "group", "count_1", "count_2", "count_3", "total", "prop_1", "prop_2", "prop_3"});
  for (const auto& r : agg.rows) {
    std::vector<std::string> f{month_label(r.year, r.month), r.group};
    for (auto c : r.counts) f.push_back(std::to_string(c));
    f.push_back(std::to_string(r.total));
    for (auto c : kCategories) f.push_back(fmt::format("{:.12g}", r.proportion(c)));
    csv::write_row(out, f);
  }
}

namespace {

constexpr std::array<std::string_view, 6> kGroupColors{"#1f77b4", "#d62728", "#2ca02c",
                                                       "#9467bd", "#ff7f0e", "#7f7f7f"};
constexpr std::array<std::string_view, kNumCategories> kLabelColors{"#e4572e", "#17bebb", "#ffc914"};

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double left = 60, right = 150, top = 30, bottom = 40;
  double width = 960, height = 360;
  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
};

void year_ticks(std::string& svg, const AggregateResult& agg, const Frame& f, double y0, double y1) {
  const std::size_t n = agg.span.months();
  for (std::size_t m = 0; m < n; ++m) {
    int month = (agg.span.first_month - 1 + static_cast<int>(m)) % 12 + 1;
    if (month != 1 && m != 0) continue;
    int year = agg.span.first_year + (agg.span.first_month - 1 + static_cast<int>(m)) / 12;
    double x = f.left + f.plot_w() * static_cast<double>(m) / static_cast<double>(n);
    svg += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"#ddd\"/>\n", x, y0, y1);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"9\" text-anchor=\"middle\">{}</text>\n", x,
                       y1 + 12, year);
  }
}

std::string render_counts_svg(const AggregateResult& agg, std::string_view title) {
  Frame f;
  const std::size_t n = agg.span.months();
  const std::size_t g_count = agg.groups.size();
  std::size_t peak = 1;
  for (const auto& r : agg.rows) peak = std::max(peak, r.total);
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"18\" font-size=\"14\">{}</text>\n",
      f.width, f.height, f.left, xml_escape(title));
  year_ticks(svg, agg, f, f.top, f.top + f.plot_h());
  svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n", f.left - 4,
                     f.top + 8, peak);
  svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"end\">0</text>\n", f.left - 4,
                     f.top + f.plot_h());
  for (std::size_t g = 0; g < g_count; ++g) {
    std::string points;
    for (std::size_t m = 0; m < n; ++m) {
      const auto& r = agg.rows[m * g_count + g];
      double x = f.left + f.plot_w() * (static_cast<double>(m) + 0.5) / static_cast<double>(n);
      double y = f.top + f.plot_h() * (1.0 - static_cast<double>(r.total) / static_cast<double>(peak));
      points += fmt::format("{:.1f},{:.1f} ", x, y);
    }
    auto color = kGroupColors[g % kGroupColors.size()];
    svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color, points);
    double ly = f.top + 14.0 * static_cast<double>(g);
    svg += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n",
                       f.width - f.right + 10, ly, color);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\">{}</text>\n", f.width - f.right + 24, ly + 9,
                       xml_escape(agg.groups[g]));
  }
  svg += "</svg>\n";
  return svg;
}

std::string render_labels_svg(const AggregateResult& agg, std::string_view title) {
  Frame f;
  const double panel_h = 140, gap = 30;
  const std::size_t n = agg.span.months();
  const std::size_t g_count = agg.groups.size();
  f.height = f.top + static_cast<double>(g_count) * (panel_h + gap) + f.bottom;
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"18\" font-size=\"14\">{}</text>\n",
      f.width, f.height, f.left, xml_escape(title));
  const double bar_w = f.plot_w() / static_cast<double>(n);
  for (std::size_t g = 0; g < g_count; ++g) {
    double y0 = f.top + static_cast<double>(g) * (panel_h + gap) + 14;
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\">{}</text>\n", f.left, y0 - 3,
                       xml_escape(agg.groups[g]));
    for (std::size_t m = 0; m < n; ++m) {
      const auto& r = agg.rows[m * g_count + g];
      if (r.total == 0) continue;
      double x = f.left + bar_w * static_cast<double>(m);
      double y = y0 + panel_h;
      for (auto c : kCategories) {
        double h = panel_h * r.proportion(c);
        y -= h;
        svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n", x, y,
                           bar_w, h, kLabelColors[index_of(c)]);
      }
    }
    if (g + 1 == g_count) year_ticks(svg, agg, f, y0, y0 + panel_h);
  }
  for (auto c : kCategories) {
    double ly = f.top + 14.0 * static_cast<double>(index_of(c));
    svg += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n",
                       f.width - f.right + 10, ly, kLabelColors[index_of(c)]);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\">{}</text>\n", f.width - f.right + 24, ly + 9,
                       category_name(c));
  }
  svg += "</svg>\n";
  return svg;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << content;
  if (!out) throw Error(fmt::format("write failed for {}", path.string()));
}

}  // namespace

std::vector<std::filesystem::path> emit_figures(const AggregateResult& agg, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(fmt::format("cannot create output directory {}: {}", out_dir.string(), ec.message()));

  struct Figure {
    std::string stem;
    bool counts;
    std::string title;
  };
  std::vector<Figure> figures;
  switch (agg.group_by) {
    case GroupBy::Party:
      figures = {{"fig4_party_counts", true, "Tweets per month by party"},
                 {"fig5_party_labels", false, "Label distribution per month by party"}};
      break;
    case GroupBy::Gender:
      figures = {{"fig6_gender_labels", false, "Label distribution per month by gender"}};
      break;
    case GroupBy::Race:
      figures = {{"fig6_race_labels", false, "Label distribution per month by race"}};
      break;
    case GroupBy::None:
      figures = {{"labels_overall", false, "Label distribution per month"}};
      break;
  }

  const bool empty = agg.counted == 0;
  if (empty) spdlog::warn("no tweets to aggregate by {}; writing header-only CSVs without images", to_string(agg.group_by));
  std::vector<std::filesystem::path> written;
  for (const auto& fig : figures) {
    auto csv_path = out_dir / (fig.stem + ".csv");
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write {}", csv_path.string()));
    if (fig.counts) {
      write_counts_csv(out, agg);
    } else {
      write_labels_csv(out, agg);
    }
    out.close();
    written.push_back(csv_path);
    if (empty) continue;
    auto svg_path = out_dir / (fig.stem + ".svg");
    write_text(svg_path, fig.counts ? render_counts_svg(agg, fig.title) : render_labels_svg(agg, fig.title));
    written.push_back(svg_path);
  }
  return written;
}

}  // namespace polyframe
