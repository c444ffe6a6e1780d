#include "ctqa/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

namespace ctqa {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::optional<int> parse_int(std::string_view field) {
    field = trim(field);
    if (field.empty()) return std::nullopt;
    size_t i = field[0] == '-' ? 1 : 0;
    if (i == field.size()) return std::nullopt;
    long value = 0;
    for (; i < field.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(field[i]))) return std::nullopt;
        value = value * 10 + (field[i] - '0');
        if (value > 1'000'000'000) return std::nullopt;
    }
    return int(field[0] == '-' ? -value : value);
}

std::string unquote(std::string_view field) {
    field = trim(field);
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"') {
        std::string out;
        out.reserve(field.size() - 2);
        for (size_t i = 1; i + 1 < field.size(); ++i) {
            if (field[i] == '\\' && i + 2 < field.size() &&
                (field[i + 1] == '"' || field[i + 1] == '\\'))
                ++i;
            out.push_back(field[i]);
        }
        return out;
    }
    return std::string(field);
}

// Splits on commas that are not inside double quotes.
std::vector<std::string_view> split_fields(std::string_view inner) {
    std::vector<std::string_view> fields;
    size_t start = 0;
    bool in_quotes = false;
    for (size_t i = 0; i < inner.size(); ++i) {
        char c = inner[i];
        if (in_quotes) {
            if (c == '\\' && i + 1 < inner.size())
                ++i;
            else if (c == '"')
                in_quotes = false;
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(inner.substr(start, i - start));
            start = i + 1;
        }
    }
    fields.push_back(inner.substr(start));
    return fields;
}

std::string join_value_fields(const std::vector<std::string_view>& fields, size_t first) {
    if (first + 1 == fields.size()) return unquote(fields[first]);
    // Unquoted commas inside the value: stitch the remaining fields back.
    std::string joined;
    for (size_t i = first; i < fields.size(); ++i) {
        if (i > first) joined += ", ";
        joined += std::string(trim(fields[i]));
    }
    return joined;
}

void classify(std::string_view inner, TupleParse& out) {
    auto reject = [&](std::string reason) {
        out.rejects.push_back({"(" + std::string(inner) + ")", std::move(reason)});
    };
    auto fields = split_fields(inner);
    auto tag = trim(fields[0]);
    if (tag.size() != 1) {
        reject("unrecognized tag '" + std::string(tag) + "'");
        return;
    }
    char t = char(std::toupper(static_cast<unsigned char>(tag[0])));
    if (t == 'T' || t == 'L') {
        if (fields.size() < 5) {
            reject("expected 5 fields for a header tuple, got " + std::to_string(fields.size()));
            return;
        }
        auto level = parse_int(fields[1]);
        auto start = parse_int(fields[2]);
        auto end = parse_int(fields[3]);
        if (!level || !start || !end) {
            reject("non-integer position field in header tuple");
            return;
        }
        out.headers.push_back({t == 'T' ? Axis::Column : Axis::Row, *level, *start, *end,
                               join_value_fields(fields, 4)});
    } else if (t == 'C') {
        if (fields.size() < 4) {
            reject("expected 4 fields for a non-header tuple, got " +
                   std::to_string(fields.size()));
            return;
        }
        auto row = parse_int(fields[1]);
        auto col = parse_int(fields[2]);
        if (!row || !col) {
            reject("non-integer position field in non-header tuple");
            return;
        }
        out.cells.push_back({*row, *col, join_value_fields(fields, 3)});
    } else {
        reject("unrecognized tag '" + std::string(tag) + "'");
    }
}

struct Interval {
    int lo;
    int hi;
};

std::vector<Interval> merged_intervals(std::span<const HeaderTuple> headers, Axis expected,
                                       std::vector<std::string>* notes) {
    std::vector<Interval> raw;
    for (const auto& h : headers) {
        if (h.axis != expected) {
            if (notes)
                notes->push_back("dropped wrong-axis header tuple " + serialize_tuple(h));
            continue;
        }
        if (h.span_start > h.span_end) {
            if (notes)
                notes->push_back("dropped empty-span header tuple " + serialize_tuple(h));
            continue;
        }
        raw.push_back({h.span_start, h.span_end});
    }
    std::sort(raw.begin(), raw.end(),
              [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<Interval> merged;
    for (const auto& iv : raw) {
        if (!merged.empty() && iv.lo <= merged.back().hi + 1)
            merged.back().hi = std::max(merged.back().hi, iv.hi);
        else
            merged.push_back(iv);
    }
    return merged;
}

bool covered(const std::vector<Interval>& intervals, int pos) {
    auto it = std::upper_bound(intervals.begin(), intervals.end(), pos,
                               [](int p, const Interval& iv) { return p < iv.lo; });
    if (it == intervals.begin()) return false;
    --it;
    return pos <= it->hi;
}

}  // namespace

TupleParse parse_tuples(std::string_view text) {
    TupleParse out;
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '(') {
            ++i;
            continue;
        }
        size_t j = i + 1;
        bool in_quotes = false;
        bool closed = false;
        bool nested = false;
        for (; j < text.size(); ++j) {
            char c = text[j];
            if (in_quotes) {
                if (c == '\\' && j + 1 < text.size())
                    ++j;
                else if (c == '"')
                    in_quotes = false;
            } else if (c == '"') {
                in_quotes = true;
            } else if (c == ')') {
                closed = true;
                break;
            } else if (c == '(') {
                nested = true;
                break;
            }
        }
        if (nested) {
            out.rejects.push_back(
                {std::string(text.substr(i, j - i)), "unbalanced parenthesis"});
            i = j;  // restart at the nested opener
            continue;
        }
        if (!closed) {
            out.rejects.push_back({std::string(text.substr(i)), "unterminated parenthesis"});
            break;
        }
        classify(text.substr(i + 1, j - i - 1), out);
        i = j + 1;
    }
    return out;
}

std::vector<DataTuple> select_cells(std::span<const HeaderTuple> row_headers,
                                    std::span<const HeaderTuple> col_headers,
                                    std::span<const DataTuple> data,
                                    std::vector<std::string>* notes) {
    auto row_iv = merged_intervals(row_headers, Axis::Row, notes);
    auto col_iv = merged_intervals(col_headers, Axis::Column, notes);
    std::vector<DataTuple> out;
    if (row_iv.empty() || col_iv.empty()) return out;
    for (const auto& cell : data)
        if (covered(row_iv, cell.row) && covered(col_iv, cell.col)) out.push_back(cell);
    std::sort(out.begin(), out.end(), [](const DataTuple& a, const DataTuple& b) {
        if (a.row != b.row) return a.row < b.row;
        if (a.col != b.col) return a.col < b.col;
        return a.value < b.value;
    });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace ctqa
