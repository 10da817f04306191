#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plateprice/numerics.hpp"

namespace plateprice {

inline constexpr int kSeqLen = 6;      // max legal plate: 2 letters + 4 digits
inline constexpr int kVocabSize = 34;  // PAD + 10 digits + 23 legal letters
inline constexpr int kPadToken = 0;

/// Calendar date, ISO ordering. Day-level resolution is all auctions need.
struct Date {
  int year = 0;
  int month = 0;  // 1-12
  int day = 0;    // 1-31

  auto operator<=>(const Date&) const = default;
  int month_index() const { return year * 12 + (month - 1); }
  std::string iso() const;
  static Date parse_iso(const std::string& s);  // throws DataError
};

/// One auction entry. price_hkd is absent exactly when the plate went unsold.
struct AuctionRecord {
  std::string plate;
  std::optional<double> price_hkd;
  Date auction_date;
  bool sold = false;
  bool afternoon_session = false;
  int order_in_session = 1;
  double stock_index = 0.0;
  double cpi = 0.0;
};

/// Fixed-length token encoding of a plate. PAD=0, '0'-'9' -> 1-10, letters
/// A,B,C,D,E,F,G,H,J,K,L,M,N,P,R,S,T,U,V,W,X,Y,Z -> 11-33 (I, O and Q are
/// not legal plate characters). PAD ids form a contiguous suffix.
struct TokenSeq {
  std::array<std::uint8_t, kSeqLen> ids{};

  bool operator==(const TokenSeq&) const = default;
};

/// Token id for one character; throws DataError naming the character.
int token_id(char c);
/// Inverse of token_id. PAD maps to '\0'.
char token_char(int id);

/// Validates a plate against the traditional-plate grammar: an optional
/// two-letter prefix followed by 1-4 digits. Throws DataError with the
/// offending character or the precise grammar violation.
void validate_plate(const std::string& plate);

/// Left-aligned encoding, PAD-filled to length 6. Enforces the grammar.
TokenSeq tokenize_plate(const std::string& plate);

/// Recovers the plate string from its tokens.
std::string detokenize(const TokenSeq& seq);

/// Loads the auction CSV (see README for the column contract). Ingestion is
/// all-or-nothing: any malformed row aborts with its line number.
std::vector<AuctionRecord> load_auction_csv(const std::string& path);

void write_auction_csv(const std::vector<AuctionRecord>& records,
                       const std::string& path);

/// Sold records with log-price targets attached.
struct Preprocessed {
  std::vector<AuctionRecord> records;
  std::vector<double> targets;  // ln(price_hkd), aligned with records
  std::size_t dropped_unsold = 0;
};

/// Drops unsold records and attaches ln(price) targets.
Preprocessed preprocess(const std::vector<AuctionRecord>& records);

/// One part of a split: encoded tokens, targets and the source records.
struct DataPart {
  std::vector<TokenSeq> tokens;
  std::vector<double> targets;
  std::vector<AuctionRecord> records;

  std::size_t size() const { return targets.size(); }
  void push_back(const AuctionRecord& rec, double target);
};

struct DatasetSplit {
  DataPart train;
  DataPart valid;
  DataPart test;
  std::uint64_t seed = 0;
};

/// Random 64/16/20 partition of the preprocessed records, reproducible from
/// the seed. Requires at least 10 records.
DatasetSplit split_dataset(const Preprocessed& data, std::uint64_t seed);

/// Shuffled index batches covering [0, n). The final short batch is kept.
/// Call once per epoch with a persistent rng to get fresh orderings.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n,
                                                    std::size_t batch_size,
                                                    SeededRng& rng);

}  // namespace plateprice
