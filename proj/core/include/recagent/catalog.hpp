#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace recagent {

/// Dense item index, 0..N-1 after ingestion.
using ItemId = std::uint32_t;
using UserId = std::int64_t;

struct Item {
    ItemId id = 0;
    std::int64_t original_id = 0;
    std::string title;
    std::vector<std::string> tags;
    double price = 0.0;
    std::string release_date;  // YYYY-MM-DD
    std::string description;
    std::int64_t popularity = 0;  // training-split interaction count
};

struct Interaction {
    UserId user_id = 0;
    ItemId item_id = 0;
    std::int64_t timestamp = 0;

    friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// Interaction as it appears in the input file, before the item id remap.
struct RawInteraction {
    UserId user_id = 0;
    std::int64_t item_original_id = 0;
    std::int64_t timestamp = 0;
};

struct Split {
    std::vector<Interaction> train;
    std::vector<Interaction> valid;
    std::vector<Interaction> test;
};

/// Query result: column order preserved, NULL cells rendered as "NULL".
struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t column_index(std::string_view name) const;  // npos when absent
    /// Compact pipe-separated rendering, truncated to max_chars with a note.
    std::string to_text(std::size_t max_chars = 2000) const;
};

/// Which guard profile a query runs under. Retrieval forbids LIMIT.
enum class SqlMode { query, retrieval };

/// Item metadata, interactions and a read-only SQLite view of the `items`
/// table. Immutable after construction; execute_sql may be called from any
/// thread.
class Catalog {
public:
    /// Remaps ids in the order `items` are given, computes the leave-one-out
    /// split and popularity, and populates the SQL store.
    static Catalog build(std::vector<Item> items, const std::vector<RawInteraction>& interactions);

    Catalog(Catalog&&) noexcept;
    Catalog& operator=(Catalog&&) noexcept;
    ~Catalog();

    std::size_t size() const noexcept;
    const std::vector<Item>& items() const noexcept;
    const Item& item(ItemId id) const;
    const std::vector<Interaction>& interactions() const noexcept;
    const Split& split() const noexcept;

    /// Exact case-insensitive (trimmed) title lookup.
    std::optional<ItemId> find_title(std::string_view title) const;
    std::optional<ItemId> find_original(std::int64_t original_id) const;

    ResultTable execute_sql(std::string_view query, SqlMode mode = SqlMode::query) const;
    std::int64_t sql_row_count() const;

    /// Schema description injected into prompts as {table_info}.
    std::string table_info() const;

private:
    struct Impl;
    explicit Catalog(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

Catalog ingest_catalog(const std::filesystem::path& items_path,
                       const std::filesystem::path& interactions_path);
Catalog ingest_catalog(std::istream& items_csv, std::istream& interactions_csv);

/// Runs `query` under the read-only guard. Throws PolicyError or SqlSyntaxError.
ResultTable execute_sql(const Catalog& catalog, std::string_view query);

/// Per user (>=3 interactions): last by timestamp -> test, second-to-last ->
/// valid, rest -> train. Ties break by item id ascending. Users with fewer
/// than 3 interactions go entirely to train.
Split split_leave_one_out(const std::vector<Interaction>& interactions);
Split split_leave_one_out(const Catalog& catalog);

}  // namespace recagent
