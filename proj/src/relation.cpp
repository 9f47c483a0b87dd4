#include "putback/relation.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace putback {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownAttribute: return "UnknownAttribute";
        case ErrorCode::UnknownTable: return "UnknownTable";
        case ErrorCode::AmbiguousAttribute: return "AmbiguousAttribute";
        case ErrorCode::DuplicateAttribute: return "DuplicateAttribute";
        case ErrorCode::TypeMismatch: return "TypeMismatch";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
        case ErrorCode::KeyViolation: return "KeyViolation";
        case ErrorCode::NotNullViolation: return "NotNullViolation";
        case ErrorCode::MissingDeleteTarget: return "MissingDeleteTarget";
        case ErrorCode::InvalidSchema: return "InvalidSchema";
        case ErrorCode::SyntaxError: return "SyntaxError";
        case ErrorCode::DuplicateBranchLiteral: return "DuplicateBranchLiteral";
        case ErrorCode::ArityMismatch: return "ArityMismatch";
        case ErrorCode::ValidationFailed: return "ValidationFailed";
        case ErrorCode::EmptyAnswer: return "EmptyAnswer";
        case ErrorCode::DomainTooLarge: return "DomainTooLarge";
        case ErrorCode::UnknownPeer: return "UnknownPeer";
        case ErrorCode::UnknownArea: return "UnknownArea";
        case ErrorCode::MalformedDelta: return "MalformedDelta";
        case ErrorCode::ScenarioParseError: return "ScenarioParseError";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

std::string to_literal(const Value& v) {
    if (v.is_null()) return "null";
    if (v.is_int()) return std::to_string(v.as_int());
    std::string out = "'";
    for (char c : v.as_text()) {
        if (c == '\'') out += '\'';
        out += c;
    }
    out += '\'';
    return out;
}

std::string to_literal(const Tuple& t) {
    std::string out = "(";
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (i) out += ", ";
        out += to_literal(t[i]);
    }
    return out + ")";
}

std::string_view to_string(AttrType t) {
    switch (t) {
        case AttrType::Int: return "int";
        case AttrType::Text: return "text";
        case AttrType::Null: return "null";
    }
    return "?";
}

std::string_view to_string(CmpOp op) {
    switch (op) {
        case CmpOp::Eq: return "=";
        case CmpOp::Lt: return "<";
        case CmpOp::Le: return "<=";
        case CmpOp::Gt: return ">";
        case CmpOp::Ge: return ">=";
    }
    return "?";
}

AttrType type_of(const Value& v) {
    if (v.is_int()) return AttrType::Int;
    if (v.is_text()) return AttrType::Text;
    return AttrType::Null;
}

bool value_fits(const Attr& attr, const Value& v) {
    if (v.is_null()) return attr.nullable || attr.type == AttrType::Null;
    return type_of(v) == attr.type;
}

// ---------------------------------------------------------------------------
// Schema

Schema::Schema(std::string name, std::vector<Attr> attrs, std::vector<std::string> key)
    : name_(std::move(name)), attrs_(std::move(attrs)), key_(std::move(key)) {
    std::set<std::string> seen;
    for (const auto& a : attrs_) {
        if (!seen.insert(a.name).second)
            throw Error(ErrorCode::DuplicateAttribute, "attribute '" + a.name + "' repeated in '" + name_ + "'");
    }
    if (attrs_.empty()) throw Error(ErrorCode::InvalidSchema, "table '" + name_ + "' has no attributes");
    if (key_.empty()) throw Error(ErrorCode::InvalidSchema, "table '" + name_ + "' has an empty key");
    std::set<std::string> key_seen;
    for (const auto& k : key_) {
        if (!key_seen.insert(k).second)
            throw Error(ErrorCode::InvalidSchema, "key attribute '" + k + "' repeated in '" + name_ + "'");
        auto idx = index_of(k);
        if (!idx) throw Error(ErrorCode::InvalidSchema, "key attribute '" + k + "' not in '" + name_ + "'");
        key_idx_.push_back(*idx);
    }
}

Schema Schema::all_key(std::string name, std::vector<Attr> attrs) {
    std::vector<std::string> key;
    for (const auto& a : attrs) key.push_back(a.name);
    return Schema(std::move(name), std::move(attrs), std::move(key));
}

std::optional<std::size_t> Schema::index_of(const std::string& attr) const {
    for (std::size_t i = 0; i < attrs_.size(); ++i)
        if (attrs_[i].name == attr) return i;
    return std::nullopt;
}

std::size_t Schema::require(const std::string& attr) const {
    auto idx = index_of(attr);
    if (!idx) {
        throw Error(ErrorCode::UnknownAttribute,
                    "no attribute '" + attr + "' in " + (name_.empty() ? std::string("relation") : "'" + name_ + "'"));
    }
    return *idx;
}

std::vector<std::string> Schema::attr_names() const {
    std::vector<std::string> out;
    out.reserve(attrs_.size());
    for (const auto& a : attrs_) out.push_back(a.name);
    return out;
}

Schema Schema::renamed(std::string name) const {
    Schema s = *this;
    s.name_ = std::move(name);
    return s;
}

Schema Schema::with_key(std::vector<std::string> key) const { return Schema(name_, attrs_, std::move(key)); }

void Schema::validate_declared() const {
    for (const auto& a : attrs_) {
        if (a.type == AttrType::Null)
            throw Error(ErrorCode::InvalidSchema, "attribute '" + a.name + "' must be int or text");
    }
    for (auto i : key_idx_) {
        if (attrs_[i].nullable)
            throw Error(ErrorCode::InvalidSchema,
                        "key attribute '" + attrs_[i].name + "' of '" + name_ + "' must not be nullable");
    }
}

bool Schema::same_shape(const Schema& other) const {
    if (attrs_.size() != other.attrs_.size()) return false;
    for (std::size_t i = 0; i < attrs_.size(); ++i) {
        if (attrs_[i].name != other.attrs_[i].name) return false;
        if (attrs_[i].type != other.attrs_[i].type) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Relation

Relation::Relation(Schema schema) : schema_(std::move(schema)) {}

Relation::Relation(Schema schema, std::vector<Tuple> rows)
    : Relation(std::move(schema), std::set<Tuple>(std::make_move_iterator(rows.begin()),
                                                  std::make_move_iterator(rows.end()))) {}

Relation::Relation(Schema schema, std::set<Tuple> rows) : schema_(std::move(schema)), rows_(std::move(rows)) {
    const auto& attrs = schema_.attrs();
    for (const auto& row : rows_) {
        if (row.size() != attrs.size()) {
            throw Error(ErrorCode::SchemaMismatch, "tuple " + to_literal(row) + " has arity " +
                                                       std::to_string(row.size()) + ", expected " +
                                                       std::to_string(attrs.size()));
        }
        for (std::size_t i = 0; i < attrs.size(); ++i) {
            if (value_fits(attrs[i], row[i])) continue;
            if (row[i].is_null())
                throw Error(ErrorCode::NotNullViolation, "null in non-nullable '" + attrs[i].name + "'");
            throw Error(ErrorCode::TypeMismatch, "value " + to_literal(row[i]) + " does not fit " +
                                                     std::string(to_string(attrs[i].type)) + " attribute '" +
                                                     attrs[i].name + "'");
        }
    }
    index_rows();
}

void Relation::index_rows() {
    by_key_.clear();
    for (const auto& row : rows_) {
        auto [it, fresh] = by_key_.emplace(key_of(row), row);
        if (!fresh) {
            throw Error(ErrorCode::KeyViolation, "rows " + to_literal(it->second) + " and " + to_literal(row) +
                                                     " share a key in '" + schema_.name() + "'");
        }
    }
}

Tuple Relation::key_of(const Tuple& row) const {
    Tuple key;
    key.reserve(schema_.key_indices().size());
    for (auto i : schema_.key_indices()) key.push_back(row[i]);
    return key;
}

const Tuple* Relation::find_by_key(const Tuple& key) const {
    auto it = by_key_.find(key);
    return it == by_key_.end() ? nullptr : &it->second;
}

Relation Relation::renamed(std::string name) const {
    Relation r = *this;
    r.schema_ = schema_.renamed(std::move(name));
    return r;
}

Relation Relation::with_key(std::vector<std::string> key) const {
    return Relation(schema_.with_key(std::move(key)), rows_);
}

// ---------------------------------------------------------------------------
// Database

Database::Database(std::vector<Relation> tables) {
    for (auto& t : tables) put(std::move(t));
}

void Database::put(Relation r) {
    auto name = r.name();
    tables_.insert_or_assign(std::move(name), std::move(r));
}

const Relation& Database::at(const std::string& name) const {
    auto it = tables_.find(name);
    if (it == tables_.end()) throw Error(ErrorCode::UnknownTable, "no table '" + name + "'");
    return it->second;
}

const Relation* Database::find(const std::string& name) const {
    auto it = tables_.find(name);
    return it == tables_.end() ? nullptr : &it->second;
}

std::map<std::string, Schema> Database::schemas() const {
    std::map<std::string, Schema> out;
    for (const auto& [name, rel] : tables_) out.emplace(name, rel.schema());
    return out;
}

void Delta::normalize() {
    std::vector<Tuple> common;
    std::set_intersection(inserts.begin(), inserts.end(), deletes.begin(), deletes.end(),
                          std::back_inserter(common));
    for (const auto& t : common) {
        inserts.erase(t);
        deletes.erase(t);
    }
}

// ---------------------------------------------------------------------------
// Predicates

bool compare_values(const Value& lhs, CmpOp op, const Value& rhs) {
    if (lhs.is_null() || rhs.is_null()) return false;
    if (type_of(lhs) != type_of(rhs)) return false;
    auto c = lhs <=> rhs;
    switch (op) {
        case CmpOp::Eq: return c == 0;
        case CmpOp::Lt: return c < 0;
        case CmpOp::Le: return c <= 0;
        case CmpOp::Gt: return c > 0;
        case CmpOp::Ge: return c >= 0;
    }
    return false;
}

void check_predicate(const Predicate& pred, const Schema& schema) {
    for (const auto& atom : pred.conjuncts) {
        if (const auto* cmp = std::get_if<Predicate::Compare>(&atom)) {
            const auto& attr = schema.attr(cmp->attr);
            if (!cmp->literal.is_null() && attr.type != AttrType::Null && type_of(cmp->literal) != attr.type) {
                throw Error(ErrorCode::TypeMismatch, "cannot compare " + std::string(to_string(attr.type)) +
                                                         " attribute '" + cmp->attr + "' with " +
                                                         to_literal(cmp->literal));
            }
        } else if (const auto* isn = std::get_if<Predicate::IsNull>(&atom)) {
            schema.require(isn->attr);
        } else {
            const auto& eq = std::get<Predicate::AttrEq>(atom);
            const auto& l = schema.attr(eq.left);
            const auto& r = schema.attr(eq.right);
            if (l.type != r.type && l.type != AttrType::Null && r.type != AttrType::Null) {
                throw Error(ErrorCode::TypeMismatch, "cannot compare '" + eq.left + "' with '" + eq.right + "'");
            }
        }
    }
}

bool satisfies(const Predicate& pred, const Schema& schema, const Tuple& row) {
    for (const auto& atom : pred.conjuncts) {
        if (const auto* cmp = std::get_if<Predicate::Compare>(&atom)) {
            if (!compare_values(row[schema.require(cmp->attr)], cmp->op, cmp->literal)) return false;
        } else if (const auto* isn = std::get_if<Predicate::IsNull>(&atom)) {
            if (!row[schema.require(isn->attr)].is_null()) return false;
        } else {
            const auto& eq = std::get<Predicate::AttrEq>(atom);
            if (!compare_values(row[schema.require(eq.left)], CmpOp::Eq, row[schema.require(eq.right)]))
                return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Operators

Schema project_rename_schema(const Schema& s, const RenamePairs& pairs) {
    std::vector<Attr> attrs;
    std::map<std::string, std::string> first_image;
    std::set<std::string> dsts;
    for (const auto& [src, dst] : pairs) {
        Attr a = s.attr(src);
        if (!dsts.insert(dst).second)
            throw Error(ErrorCode::DuplicateAttribute, "projection target '" + dst + "' repeated");
        a.name = dst;
        attrs.push_back(std::move(a));
        first_image.emplace(src, dst);
    }
    std::vector<std::string> key;
    for (const auto& k : s.key()) {
        auto it = first_image.find(k);
        if (it == first_image.end()) return Schema::all_key("", std::move(attrs));
        key.push_back(it->second);
    }
    return Schema("", std::move(attrs), std::move(key));
}

Relation project_rename(const Relation& r, const RenamePairs& pairs) {
    Schema out = project_rename_schema(r.schema(), pairs);
    std::vector<std::size_t> idx;
    for (const auto& p : pairs) idx.push_back(r.schema().require(p.first));
    std::set<Tuple> rows;
    for (const auto& row : r.rows()) {
        Tuple t;
        t.reserve(idx.size());
        for (auto i : idx) t.push_back(row[i]);
        rows.insert(std::move(t));
    }
    return Relation(std::move(out), std::move(rows));
}

namespace {

struct JoinPlan {
    std::vector<std::pair<std::size_t, std::size_t>> conds;  // left idx, right idx
    std::vector<std::size_t> right_kept;                    // right columns appended to output
    Schema schema;
};

JoinPlan plan_join(const Schema& left, const Schema& right, const JoinConds& conds) {
    JoinPlan plan;
    std::set<std::size_t> merged;
    std::map<std::string, std::string> right_to_out;
    for (const auto& [l, r] : conds) {
        auto li = left.require(l);
        auto ri = right.require(r);
        const auto& la = left.attrs()[li];
        const auto& ra = right.attrs()[ri];
        if (la.type != ra.type && la.type != AttrType::Null && ra.type != AttrType::Null)
            throw Error(ErrorCode::TypeMismatch, "join condition " + l + " = " + r + " compares different types");
        plan.conds.emplace_back(li, ri);
        if (l == r) {
            merged.insert(ri);
            right_to_out[r] = l;
        }
    }
    std::vector<Attr> attrs = left.attrs();
    for (std::size_t i = 0; i < right.arity(); ++i) {
        if (merged.count(i)) continue;
        const auto& a = right.attrs()[i];
        if (left.has(a.name))
            throw Error(ErrorCode::AmbiguousAttribute, "attribute '" + a.name + "' appears on both join sides");
        plan.right_kept.push_back(i);
        attrs.push_back(a);
        right_to_out[a.name] = a.name;
    }

    auto covered = [](const Schema& s, const std::set<std::string>& cols) {
        return std::all_of(s.key().begin(), s.key().end(), [&](const auto& k) { return cols.count(k) != 0; });
    };
    std::set<std::string> left_cols, right_cols;
    for (const auto& [l, r] : conds) {
        left_cols.insert(l);
        right_cols.insert(r);
    }
    std::vector<std::string> key;
    if (covered(right, right_cols)) {
        key = left.key();
    } else if (covered(left, left_cols)) {
        for (const auto& k : right.key()) {
            auto it = right_to_out.find(k);
            if (it != right_to_out.end()) {
                key.push_back(it->second);
            } else {
                // Merged into a left column with a different name is impossible (only same names merge).
                key.push_back(k);
            }
        }
    } else {
        key = left.key();
        for (const auto& k : right.key()) {
            const auto& out = right_to_out.at(k);
            if (std::find(key.begin(), key.end(), out) == key.end()) key.push_back(out);
        }
    }
    plan.schema = Schema("", std::move(attrs), std::move(key));
    return plan;
}

}  // namespace

Schema equi_join_schema(const Schema& left, const Schema& right, const JoinConds& conds) {
    return plan_join(left, right, conds).schema;
}

Relation equi_join(const Relation& left, const Relation& right, const JoinConds& conds) {
    JoinPlan plan = plan_join(left.schema(), right.schema(), conds);
    // Hash the right side on its join columns.
    std::map<Tuple, std::vector<const Tuple*>> index;
    for (const auto& row : right.rows()) {
        Tuple k;
        bool has_null = false;
        for (const auto& c : plan.conds) {
            has_null = has_null || row[c.second].is_null();
            k.push_back(row[c.second]);
        }
        if (!has_null) index[k].push_back(&row);
    }
    std::set<Tuple> rows;
    for (const auto& lrow : left.rows()) {
        Tuple k;
        bool has_null = false;
        for (const auto& c : plan.conds) {
            has_null = has_null || lrow[c.first].is_null();
            k.push_back(lrow[c.first]);
        }
        if (has_null) continue;
        auto it = index.find(k);
        if (it == index.end()) continue;
        for (const Tuple* rrow : it->second) {
            bool ok = true;
            for (const auto& c : plan.conds) ok = ok && compare_values(lrow[c.first], CmpOp::Eq, (*rrow)[c.second]);
            if (!ok) continue;
            Tuple t = lrow;
            for (auto i : plan.right_kept) t.push_back((*rrow)[i]);
            rows.insert(std::move(t));
        }
    }
    return Relation(std::move(plan.schema), std::move(rows));
}

Schema union_schema(const Schema& a, const Schema& b, std::optional<std::vector<std::string>> key) {
    if (a.arity() != b.arity())
        throw Error(ErrorCode::SchemaMismatch, "union of relations with different arity");
    std::vector<Attr> attrs;
    for (const auto& x : a.attrs()) {
        auto idx = b.index_of(x.name);
        if (!idx) throw Error(ErrorCode::SchemaMismatch, "union operand lacks attribute '" + x.name + "'");
        const auto& y = b.attrs()[*idx];
        Attr out = x;
        if (x.type == AttrType::Null) {
            out.type = y.type;
            out.nullable = true;
        } else if (y.type == AttrType::Null) {
            out.nullable = true;
        } else if (x.type != y.type) {
            throw Error(ErrorCode::SchemaMismatch, "union operands disagree on the type of '" + x.name + "'");
        }
        out.nullable = out.nullable || y.nullable;
        attrs.push_back(std::move(out));
    }
    if (key) return Schema("", std::move(attrs), std::move(*key));
    return Schema::all_key("", std::move(attrs));
}

Relation union_of(const Relation& a, const Relation& b, std::optional<std::vector<std::string>> key) {
    Schema out = union_schema(a.schema(), b.schema(), std::move(key));
    std::set<Tuple> rows = a.rows();
    Relation aligned = reorder(b, a.schema().attr_names());
    rows.insert(aligned.rows().begin(), aligned.rows().end());
    return Relation(std::move(out), std::move(rows));
}

Relation select_rows(const Relation& r, const Predicate& pred) {
    check_predicate(pred, r.schema());
    std::set<Tuple> rows;
    for (const auto& row : r.rows())
        if (satisfies(pred, r.schema(), row)) rows.insert(row);
    return Relation(r.schema().renamed(""), std::move(rows));
}

Schema const_extend_schema(const Schema& s, const std::string& attr, const Value& literal) {
    if (s.has(attr)) throw Error(ErrorCode::DuplicateAttribute, "constant column '" + attr + "' already exists");
    std::vector<Attr> attrs = s.attrs();
    attrs.push_back(Attr{attr, type_of(literal), literal.is_null()});
    return Schema("", std::move(attrs), s.key());
}

Relation const_extend(const Relation& r, const std::string& attr, const Value& literal) {
    Schema out = const_extend_schema(r.schema(), attr, literal);
    std::set<Tuple> rows;
    for (const auto& row : r.rows()) {
        Tuple t = row;
        t.push_back(literal);
        rows.insert(std::move(t));
    }
    return Relation(std::move(out), std::move(rows));
}

Relation apply_delta(const Relation& r, const Delta& d) {
    for (const auto& t : d.deletes) {
        if (d.inserts.count(t))
            throw Error(ErrorCode::MalformedDelta, "tuple " + to_literal(t) + " both inserted and deleted");
        if (!r.contains(t))
            throw Error(ErrorCode::MissingDeleteTarget,
                        "delete target " + to_literal(t) + " not in '" + r.name() + "'");
    }
    std::set<Tuple> rows = r.rows();
    for (const auto& t : d.deletes) rows.erase(t);
    rows.insert(d.inserts.begin(), d.inserts.end());
    return Relation(r.schema(), std::move(rows));
}

Delta diff(const Relation& before, const Relation& after) {
    if (!before.schema().same_shape(after.schema()))
        throw Error(ErrorCode::SchemaMismatch, "diff of relations with different schemas");
    Delta d;
    std::set_difference(after.rows().begin(), after.rows().end(), before.rows().begin(), before.rows().end(),
                        std::inserter(d.inserts, d.inserts.end()));
    std::set_difference(before.rows().begin(), before.rows().end(), after.rows().begin(), after.rows().end(),
                        std::inserter(d.deletes, d.deletes.end()));
    return d;
}

Database apply_deltas(const Database& db, const DeltaMap& deltas) {
    Database out = db;
    for (const auto& [table, d] : deltas) {
        if (d.empty()) continue;
        out.put(apply_delta(db.at(table), d));
    }
    return out;
}

DeltaMap diff(const Database& before, const Database& after) {
    DeltaMap out;
    for (const auto& [name, rel] : after) {
        Delta d = diff(before.at(name), rel);
        if (!d.empty()) out.emplace(name, std::move(d));
    }
    return out;
}

Relation reorder(const Relation& r, const std::vector<std::string>& names) {
    RenamePairs pairs;
    for (const auto& n : names) pairs.emplace_back(n, n);
    Relation out = project_rename(r, pairs);
    return out.renamed(r.name());
}

}  // namespace putback
