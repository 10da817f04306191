#include "plateprice/plate_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace plateprice {

namespace {

constexpr const char* kLetters = "ABCDEFGHJKLMNPRSTUVWXYZ";  // no I, O, Q

constexpr const char* kCsvHeader =
    "plate,price_hkd,auction_date,sold,afternoon_session,order_in_session,"
    "stock_index,cpi";

}  // namespace

std::string Date::iso() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
  return buf;
}

Date Date::parse_iso(const std::string& s) {
  Date d;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-' ||
      !std::all_of(s.begin(), s.begin() + 4, ::isdigit) ||
      !std::isdigit(static_cast<unsigned char>(s[5])) ||
      !std::isdigit(static_cast<unsigned char>(s[6])) ||
      !std::isdigit(static_cast<unsigned char>(s[8])) ||
      !std::isdigit(static_cast<unsigned char>(s[9]))) {
    throw DataError("bad date '" + s + "', expected YYYY-MM-DD");
  }
  d.year = std::stoi(s.substr(0, 4));
  d.month = std::stoi(s.substr(5, 2));
  d.day = std::stoi(s.substr(8, 2));
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) {
    throw DataError("bad date '" + s + "', out-of-range month or day");
  }
  return d;
}

int token_id(char c) {
  if (c >= '0' && c <= '9') return 1 + (c - '0');
  const char* p = std::strchr(kLetters, c);
  if (c != '\0' && p != nullptr) {
    return 11 + static_cast<int>(p - kLetters);
  }
  throw DataError(std::string("illegal plate character '") + c + "'");
}

char token_char(int id) {
  if (id == kPadToken) return '\0';
  if (id >= 1 && id <= 10) return static_cast<char>('0' + (id - 1));
  if (id >= 11 && id < kVocabSize) return kLetters[id - 11];
  throw DataError("token id " + std::to_string(id) + " out of range");
}

void validate_plate(const std::string& plate) {
  if (plate.empty()) throw DataError("empty plate");
  if (plate.size() > kSeqLen) {
    throw DataError("plate '" + plate + "' longer than " +
                    std::to_string(kSeqLen) + " characters");
  }
  std::size_t letters = 0;
  while (letters < plate.size() && plate[letters] >= 'A' && plate[letters] <= 'Z') {
    ++letters;
  }
  for (char c : plate) token_id(c);  // rejects I/O/Q and anything else illegal
  if (letters != 0 && letters != 2) {
    throw DataError("plate '" + plate + "' must have no prefix or a two-letter prefix");
  }
  const std::size_t digits = plate.size() - letters;
  if (digits < 1 || digits > 4) {
    throw DataError("plate '" + plate + "' must carry 1-4 digits");
  }
  for (std::size_t i = letters; i < plate.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(plate[i]))) {
      throw DataError("plate '" + plate + "' has a letter after its digits");
    }
  }
}

TokenSeq tokenize_plate(const std::string& plate) {
  validate_plate(plate);
  TokenSeq seq;
  for (std::size_t i = 0; i < plate.size(); ++i) {
    seq.ids[i] = static_cast<std::uint8_t>(token_id(plate[i]));
  }
  return seq;  // remaining ids stay PAD
}

std::string detokenize(const TokenSeq& seq) {
  std::string plate;
  for (int id : seq.ids) {
    if (id == kPadToken) break;
    plate.push_back(token_char(id));
  }
  return plate;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_positive_real(const std::string& s, const char* what, int line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !(v > 0.0)) {
    throw DataError("line " + std::to_string(line) + ": bad " + what + " '" + s + "'");
  }
  return v;
}

bool parse_flag(const std::string& s, const char* what, int line) {
  if (s == "0") return false;
  if (s == "1") return true;
  throw DataError("line " + std::to_string(line) + ": " + what + " must be 0 or 1, got '" + s + "'");
}

}  // namespace

std::vector<AuctionRecord> load_auction_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
  if (split_csv_line(line) != split_csv_line(kCsvHeader)) {
    throw DataError("'" + path + "' has an unexpected header, want: " +
                    std::string(kCsvHeader));
  }
  std::vector<AuctionRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8) {
      throw DataError("line " + std::to_string(line_no) + ": expected 8 columns, got " +
                      std::to_string(f.size()));
    }
    AuctionRecord rec;
    try {
      validate_plate(f[0]);
      rec.plate = f[0];
      rec.sold = parse_flag(f[3], "sold", line_no);
      if (rec.sold) {
        if (f[1].empty()) {
          throw DataError("line " + std::to_string(line_no) + ": sold=1 but price is empty");
        }
        rec.price_hkd = parse_positive_real(f[1], "price_hkd", line_no);
      } else if (!f[1].empty()) {
        throw DataError("line " + std::to_string(line_no) + ": sold=0 but price is present");
      }
      rec.auction_date = Date::parse_iso(f[2]);
      rec.afternoon_session = parse_flag(f[4], "afternoon_session", line_no);
      rec.order_in_session = static_cast<int>(parse_positive_real(f[5], "order_in_session", line_no));
      rec.stock_index = parse_positive_real(f[6], "stock_index", line_no);
      rec.cpi = parse_positive_real(f[7], "cpi", line_no);
    } catch (const DataError& e) {
      std::string msg = e.what();
      if (msg.rfind("line ", 0) == 0) throw;
      throw DataError("line " + std::to_string(line_no) + ": " + msg);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_auction_csv(const std::vector<AuctionRecord>& records,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << kCsvHeader << "\n";
  char price[40];
  for (const auto& r : records) {
    if (r.price_hkd) {
      std::snprintf(price, sizeof(price), "%.2f", *r.price_hkd);
    } else {
      price[0] = '\0';
    }
    char row[160];
    std::snprintf(row, sizeof(row), "%s,%s,%s,%d,%d,%d,%.4f,%.4f",
                  r.plate.c_str(), price, r.auction_date.iso().c_str(),
                  r.sold ? 1 : 0, r.afternoon_session ? 1 : 0,
                  r.order_in_session, r.stock_index, r.cpi);
    out << row << "\n";
  }
}

Preprocessed preprocess(const std::vector<AuctionRecord>& records) {
  Preprocessed out;
  for (const auto& r : records) {
    if (!r.sold) {
      ++out.dropped_unsold;
      continue;
    }
    if (!r.price_hkd || !(*r.price_hkd > 0.0)) {
      throw DataError("plate " + r.plate + ": sold with non-positive price");
    }
    out.records.push_back(r);
    out.targets.push_back(std::log(*r.price_hkd));
  }
  return out;
}

void DataPart::push_back(const AuctionRecord& rec, double target) {
  tokens.push_back(tokenize_plate(rec.plate));
  targets.push_back(target);
  records.push_back(rec);
}

DatasetSplit split_dataset(const Preprocessed& data, std::uint64_t seed) {
  const std::size_t n = data.records.size();
  if (n < 10) {
    throw DataError("split_dataset needs at least 10 records, got " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SeededRng rng(seed);
  rng.shuffle(order);

  const auto n_train = static_cast<std::size_t>(std::llround(0.64 * n));
  const auto n_valid = static_cast<std::size_t>(std::llround(0.16 * n));

  DatasetSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    DataPart& part = i < n_train            ? split.train
                     : i < n_train + n_valid ? split.valid
                                             : split.test;
    part.push_back(data.records[order[i]], data.targets[order[i]]);
  }
  return split;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n,
                                                    std::size_t batch_size,
                                                    SeededRng& rng) {
  if (batch_size < 1) throw DataError("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

}  // namespace plateprice
