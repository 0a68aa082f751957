#include "recagent/catalog.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include "csv.hpp"
#include "recagent/errors.hpp"
#include "recagent/sql_guard.hpp"
#include "recagent/text.hpp"

namespace recagent {
namespace {

struct Column {
    const char* name;
    const char* sql_type;
    const char* note;
};

// Single source for both CREATE TABLE and the prompt schema string.
constexpr Column kItemColumns[] = {
    {"id", "INTEGER", "internal item id"},
    {"title", "TEXT", "item title"},
    {"tags", "TEXT", "tags joined by '|', e.g. 'RPG|Open World'"},
    {"price", "REAL", "price in currency units"},
    {"release_date", "TEXT", "release date formatted YYYY-MM-DD"},
    {"description", "TEXT", "free-text description"},
    {"popularity", "INTEGER", "number of user interactions"},
};

struct DbCloser {
    void operator()(sqlite3* db) const { sqlite3_close(db); }
};
struct StmtFinalizer {
    void operator()(sqlite3_stmt* s) const { sqlite3_finalize(s); }
};
using DbHandle = std::unique_ptr<sqlite3, DbCloser>;
using StmtHandle = std::unique_ptr<sqlite3_stmt, StmtFinalizer>;

void exec_or_throw(sqlite3* db, const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown sqlite error";
        sqlite3_free(err);
        throw Error("sql store setup failed: " + msg);
    }
}

StmtHandle prepare(sqlite3* db, std::string_view sql) {
    sqlite3_stmt* raw = nullptr;
    if (sqlite3_prepare_v2(db, sql.data(), static_cast<int>(sql.size()), &raw, nullptr) !=
        SQLITE_OK) {
        throw SqlSyntaxError(sqlite3_errmsg(db));
    }
    return StmtHandle(raw);
}

// Second line of defence behind the token guard: the connection itself only
// authorizes reads.
int read_only_authorizer(void*, int action, const char*, const char*, const char*, const char*) {
    switch (action) {
        case SQLITE_SELECT:
        case SQLITE_READ:
        case SQLITE_FUNCTION:
        case SQLITE_RECURSIVE:
            return SQLITE_OK;
        default:
            return SQLITE_DENY;
    }
}

bool valid_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    int y = 0, m = 0, d = 0;
    auto parse = [](std::string_view part, int& out) {
        auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
        return ec == std::errc{} && p == part.data() + part.size();
    };
    if (!parse(s.substr(0, 4), y) || !parse(s.substr(5, 2), m) || !parse(s.substr(8, 2), d))
        return false;
    if (m < 1 || m > 12 || d < 1) return false;
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int max_day = kDays[m - 1];
    bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    if (m == 2 && leap) max_day = 29;
    return d <= max_day;
}

template <typename T>
T parse_number(std::string_view field, const char* what, std::size_t line) {
    auto s = text::trim(field);
    T value{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
        throw IngestError(std::string("invalid ") + what + " '" + std::string(field) + "'", line);
    return value;
}

void expect_header(csv::Reader& reader, const std::vector<std::string>& expected,
                   const char* file) {
    auto header = reader.next();
    if (!header) throw IngestError(std::string(file) + " is empty (missing header row)");
    std::vector<std::string> got;
    for (auto& f : header->fields) got.push_back(text::fold_key(f));
    if (got != expected)
        throw IngestError(std::string(file) + " header must be " + text::join(expected, ","),
                          header->line);
}

}  // namespace

std::size_t ResultTable::column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (text::iequals(columns[i], name)) return i;
    return std::string::npos;
}

std::string ResultTable::to_text(std::size_t max_chars) const {
    std::string out = text::join(columns, " | ");
    out += '\n';
    for (const auto& row : rows) {
        out += text::join(row, " | ");
        out += '\n';
    }
    if (rows.empty()) out += "(no rows)\n";
    if (out.size() > max_chars) {
        std::string note = "... (truncated, " + std::to_string(rows.size()) + " rows total)";
        std::size_t keep = max_chars > note.size() ? max_chars - note.size() : 0;
        out = out.substr(0, keep) + note;
    } else if (!out.empty() && out.back() == '\n') {
        out.pop_back();
    }
    return out;
}

struct Catalog::Impl {
    std::vector<Item> items;
    std::vector<Interaction> interactions;
    Split split;
    std::unordered_map<std::string, ItemId> by_title;
    std::unordered_map<std::int64_t, ItemId> by_original;
    DbHandle db;
    mutable std::mutex db_mutex;
};

Catalog::Catalog(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Catalog::Catalog(Catalog&&) noexcept = default;
Catalog& Catalog::operator=(Catalog&&) noexcept = default;
Catalog::~Catalog() = default;

Catalog Catalog::build(std::vector<Item> items, const std::vector<RawInteraction>& interactions) {
    auto impl = std::make_unique<Impl>();

    for (std::size_t i = 0; i < items.size(); ++i) {
        Item& item = items[i];
        item.id = static_cast<ItemId>(i);
        item.popularity = 0;
        if (item.price < 0) throw IngestError("negative price for item " + std::to_string(item.original_id));
        auto key = text::fold_key(item.title);
        if (key.empty()) throw IngestError("empty title for item " + std::to_string(item.original_id));
        if (auto [it, fresh] = impl->by_title.emplace(key, item.id); !fresh) {
            throw IngestError("duplicate title '" + item.title + "' for ids " +
                              std::to_string(items[it->second].original_id) + " and " +
                              std::to_string(item.original_id));
        }
        if (auto [it, fresh] = impl->by_original.emplace(item.original_id, item.id); !fresh) {
            throw IngestError("duplicate item id " + std::to_string(item.original_id));
        }
    }

    impl->interactions.reserve(interactions.size());
    for (const auto& raw : interactions) {
        auto it = impl->by_original.find(raw.item_original_id);
        if (it == impl->by_original.end())
            throw IngestError("interaction references unknown item " +
                              std::to_string(raw.item_original_id));
        impl->interactions.push_back({raw.user_id, it->second, raw.timestamp});
    }

    impl->split = split_leave_one_out(impl->interactions);
    for (const auto& x : impl->split.train) ++items[x.item_id].popularity;
    impl->items = std::move(items);

    sqlite3* raw_db = nullptr;
    if (sqlite3_open_v2(":memory:", &raw_db,
                        SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                        nullptr) != SQLITE_OK) {
        sqlite3_close(raw_db);
        throw Error("cannot open in-memory sql store");
    }
    impl->db.reset(raw_db);
    sqlite3* db = impl->db.get();

    std::string create = "CREATE TABLE items (";
    for (std::size_t i = 0; i < std::size(kItemColumns); ++i) {
        if (i) create += ", ";
        create += std::string(kItemColumns[i].name) + " " + kItemColumns[i].sql_type;
    }
    create += ")";
    exec_or_throw(db, create.c_str());
    exec_or_throw(db, "CREATE TABLE item_tags (item_id INTEGER, tag TEXT)");
    exec_or_throw(db, "BEGIN");
    {
        auto ins = prepare(db, "INSERT INTO items VALUES (?,?,?,?,?,?,?)");
        auto tag_ins = prepare(db, "INSERT INTO item_tags VALUES (?,?)");
        for (const auto& item : impl->items) {
            auto tags = text::join(item.tags, "|");
            sqlite3_bind_int64(ins.get(), 1, item.id);
            sqlite3_bind_text(ins.get(), 2, item.title.c_str(), -1, SQLITE_TRANSIENT);
            sqlite3_bind_text(ins.get(), 3, tags.c_str(), -1, SQLITE_TRANSIENT);
            sqlite3_bind_double(ins.get(), 4, item.price);
            sqlite3_bind_text(ins.get(), 5, item.release_date.c_str(), -1, SQLITE_TRANSIENT);
            sqlite3_bind_text(ins.get(), 6, item.description.c_str(), -1, SQLITE_TRANSIENT);
            sqlite3_bind_int64(ins.get(), 7, item.popularity);
            if (sqlite3_step(ins.get()) != SQLITE_DONE) throw Error(sqlite3_errmsg(db));
            sqlite3_reset(ins.get());
            for (const auto& tag : item.tags) {
                sqlite3_bind_int64(tag_ins.get(), 1, item.id);
                sqlite3_bind_text(tag_ins.get(), 2, tag.c_str(), -1, SQLITE_TRANSIENT);
                if (sqlite3_step(tag_ins.get()) != SQLITE_DONE) throw Error(sqlite3_errmsg(db));
                sqlite3_reset(tag_ins.get());
            }
        }
    }
    exec_or_throw(db, "COMMIT");
    exec_or_throw(db, "PRAGMA query_only = 1");
    sqlite3_set_authorizer(db, read_only_authorizer, nullptr);

    return Catalog(std::move(impl));
}

std::size_t Catalog::size() const noexcept { return impl_->items.size(); }
const std::vector<Item>& Catalog::items() const noexcept { return impl_->items; }
const Item& Catalog::item(ItemId id) const { return impl_->items.at(id); }
const std::vector<Interaction>& Catalog::interactions() const noexcept { return impl_->interactions; }
const Split& Catalog::split() const noexcept { return impl_->split; }

std::optional<ItemId> Catalog::find_title(std::string_view title) const {
    auto it = impl_->by_title.find(text::fold_key(title));
    if (it == impl_->by_title.end()) return std::nullopt;
    return it->second;
}

std::optional<ItemId> Catalog::find_original(std::int64_t original_id) const {
    auto it = impl_->by_original.find(original_id);
    if (it == impl_->by_original.end()) return std::nullopt;
    return it->second;
}

ResultTable Catalog::execute_sql(std::string_view query, SqlMode mode) const {
    sql::check_read_only(query, {.allow_limit = mode == SqlMode::query});

    std::lock_guard lock(impl_->db_mutex);
    sqlite3* db = impl_->db.get();
    auto stmt = prepare(db, query);

    ResultTable table;
    int ncol = sqlite3_column_count(stmt.get());
    for (int c = 0; c < ncol; ++c) table.columns.emplace_back(sqlite3_column_name(stmt.get(), c));
    while (true) {
        int rc = sqlite3_step(stmt.get());
        if (rc == SQLITE_DONE) break;
        if (rc != SQLITE_ROW) {
            if (rc == SQLITE_AUTH) throw PolicyError(sqlite3_errmsg(db));
            throw SqlSyntaxError(sqlite3_errmsg(db));
        }
        std::vector<std::string> row;
        row.reserve(static_cast<std::size_t>(ncol));
        for (int c = 0; c < ncol; ++c) {
            auto* txt = sqlite3_column_text(stmt.get(), c);
            row.emplace_back(txt ? reinterpret_cast<const char*>(txt) : "NULL");
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::int64_t Catalog::sql_row_count() const {
    auto t = execute_sql("SELECT COUNT(*) FROM items");
    return std::stoll(t.rows.at(0).at(0));
}

std::string Catalog::table_info() const {
    std::ostringstream out;
    out << "Table `items` (one row per item):\n";
    for (const auto& col : kItemColumns)
        out << "- " << col.name << " (" << col.sql_type << "): " << col.note << "\n";
    out << "Table `item_tags` (one row per item tag): item_id (INTEGER), tag (TEXT)\n";
    out << "String comparisons with LIKE are case-insensitive.";
    return out.str();
}

ResultTable execute_sql(const Catalog& catalog, std::string_view query) {
    return catalog.execute_sql(query, SqlMode::query);
}

Split split_leave_one_out(const std::vector<Interaction>& interactions) {
    std::map<UserId, std::vector<Interaction>> by_user;
    for (const auto& x : interactions) by_user[x.user_id].push_back(x);

    Split split;
    for (auto& [user, rows] : by_user) {
        std::sort(rows.begin(), rows.end(), [](const Interaction& a, const Interaction& b) {
            if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
            return a.item_id < b.item_id;
        });
        if (rows.size() < 3) {
            split.train.insert(split.train.end(), rows.begin(), rows.end());
            continue;
        }
        split.train.insert(split.train.end(), rows.begin(), rows.end() - 2);
        split.valid.push_back(rows[rows.size() - 2]);
        split.test.push_back(rows.back());
    }
    return split;
}

Split split_leave_one_out(const Catalog& catalog) { return split_leave_one_out(catalog.interactions()); }

Catalog ingest_catalog(std::istream& items_csv, std::istream& interactions_csv) {
    std::vector<Item> items;
    {
        csv::Reader reader(items_csv);
        expect_header(reader, {"id", "title", "tags", "price", "release_date", "description"},
                      "items CSV");
        while (auto row = reader.next()) {
            if (row->fields.size() != 6)
                throw IngestError("expected 6 fields, got " + std::to_string(row->fields.size()),
                                  row->line);
            Item item;
            item.original_id = parse_number<std::int64_t>(row->fields[0], "id", row->line);
            item.title = text::trim_copy(row->fields[1]);
            if (item.title.empty()) throw IngestError("empty title", row->line);
            for (auto& tag : text::split(row->fields[2], '|')) {
                auto t = text::trim_copy(tag);
                if (!t.empty()) item.tags.push_back(std::move(t));
            }
            item.price = parse_number<double>(row->fields[3], "price", row->line);
            if (item.price < 0) throw IngestError("negative price", row->line);
            item.release_date = text::trim_copy(row->fields[4]);
            if (!valid_date(item.release_date))
                throw IngestError("invalid release_date '" + item.release_date + "'", row->line);
            item.description = row->fields[5];
            items.push_back(std::move(item));
        }
    }

    std::vector<RawInteraction> raw;
    {
        std::unordered_map<std::int64_t, bool> known;
        for (const auto& item : items) known[item.original_id] = true;
        csv::Reader reader(interactions_csv);
        expect_header(reader, {"user_id", "item_id", "timestamp"}, "interactions CSV");
        while (auto row = reader.next()) {
            if (row->fields.size() != 3)
                throw IngestError("expected 3 fields, got " + std::to_string(row->fields.size()),
                                  row->line);
            RawInteraction x;
            x.user_id = parse_number<std::int64_t>(row->fields[0], "user_id", row->line);
            x.item_original_id = parse_number<std::int64_t>(row->fields[1], "item_id", row->line);
            x.timestamp = parse_number<std::int64_t>(row->fields[2], "timestamp", row->line);
            if (!known.count(x.item_original_id))
                throw IngestError("unknown item id " + std::to_string(x.item_original_id),
                                  row->line);
            raw.push_back(x);
        }
    }
    return Catalog::build(std::move(items), raw);
}

Catalog ingest_catalog(const std::filesystem::path& items_path,
                       const std::filesystem::path& interactions_path) {
    std::ifstream items(items_path);
    if (!items) throw IngestError("cannot open " + items_path.string());
    std::ifstream interactions(interactions_path);
    if (!interactions) throw IngestError("cannot open " + interactions_path.string());
    return ingest_catalog(items, interactions);
}

}  // namespace recagent
