#include "putback/parser.hpp"

#include "select_parts.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

namespace putback {

namespace {

enum class Tok { Ident, Int, Text, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    std::int64_t number = 0;
    int line = 1;
    int column = 1;
};

const std::set<std::string>& keywords() {
    static const std::set<std::string> kw = {"CHECK", "VIEW",  "EQUALS", "UPDATE", "IN",     "SOURCE", "WITH",
                                             "VSPLIT", "HSPLIT", "ON",   "OTHERWISE", "SELECT", "AS",   "FROM",
                                             "WHERE", "AND",   "IS",     "NULL",   "null"};
    return kw;
}

std::vector<Token> lex(std::string_view src) {
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++i;
        }
    };
    while (i < src.size()) {
        char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (c == '-' && i + 1 < src.size() && src[i + 1] == '-') {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        Token t;
        t.line = line;
        t.column = col;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            t.kind = Tok::Ident;
            t.text = std::string(src.substr(i, j - i));
            advance(j - i);
        } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                   (c == '-' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            std::size_t j = i + 1;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            t.kind = Tok::Int;
            t.text = std::string(src.substr(i, j - i));
            try {
                t.number = std::stoll(t.text);
            } catch (const std::out_of_range&) {
                throw SyntaxError("integer literal out of range", line, col);
            }
            advance(j - i);
        } else if (c == '\'') {
            std::string text;
            std::size_t j = i + 1;
            bool closed = false;
            while (j < src.size()) {
                if (src[j] == '\'') {
                    if (j + 1 < src.size() && src[j + 1] == '\'') {
                        text += '\'';
                        j += 2;
                        continue;
                    }
                    closed = true;
                    ++j;
                    break;
                }
                text += src[j++];
            }
            if (!closed) throw SyntaxError("unterminated text literal", line, col);
            t.kind = Tok::Text;
            t.text = std::move(text);
            advance(j - i);
        } else if (c == '<' || c == '>') {
            t.kind = Tok::Punct;
            if (i + 1 < src.size() && src[i + 1] == '=') {
                t.text = std::string{c, '='};
                advance(2);
            } else {
                t.text = std::string(1, c);
                advance(1);
            }
        } else if (std::string_view(",{};.=*").find(c) != std::string_view::npos) {
            t.kind = Tok::Punct;
            t.text = std::string(1, c);
            advance(1);
        } else {
            throw SyntaxError(std::string("unexpected character '") + c + "'", line, col);
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.line = line;
    end.column = col;
    out.push_back(end);
    return out;
}

class Parser {
public:
    Parser(std::string_view text, const SchemaMap* schemas) : toks_(lex(text)), schemas_(schemas) {}

    Program program() {
        Program p{statement()};
        expect_end();
        return p;
    }

    Query standalone_query() {
        Query q = query();
        if (is_punct(";")) next();
        expect_end();
        return q;
    }

private:
    // -- token helpers ------------------------------------------------------
    const Token& peek() const { return toks_[pos_]; }
    const Token& next() { return toks_[pos_ == toks_.size() - 1 ? pos_ : pos_++]; }

    [[noreturn]] void fail(const std::string& msg) const { throw SyntaxError(msg, peek().line, peek().column); }

    static std::string describe(const Token& t) {
        switch (t.kind) {
            case Tok::End: return "end of input";
            case Tok::Text: return "text literal";
            default: return "'" + t.text + "'";
        }
    }

    bool is_kw(const char* kw) const { return peek().kind == Tok::Ident && peek().text == kw; }
    bool is_punct(const char* p) const { return peek().kind == Tok::Punct && peek().text == p; }

    void expect_kw(const char* kw) {
        if (!is_kw(kw)) fail(std::string("expected ") + kw + ", found " + describe(peek()));
        next();
    }

    void expect_punct(const char* p) {
        if (!is_punct(p)) fail(std::string("expected '") + p + "', found " + describe(peek()));
        next();
    }

    void expect_end() {
        if (peek().kind != Tok::End) fail("unexpected " + describe(peek()) + " after end of statement");
    }

    bool at_identifier() const { return peek().kind == Tok::Ident && !keywords().count(peek().text); }

    std::string identifier(const char* what) {
        if (!at_identifier()) fail(std::string("expected ") + what + ", found " + describe(peek()));
        return next().text;
    }

    std::vector<std::string> attrs() {
        std::vector<std::string> out{identifier("attribute name")};
        while (is_punct(",")) {
            next();
            out.push_back(identifier("attribute name"));
        }
        return out;
    }

    bool at_literal() const {
        return peek().kind == Tok::Int || peek().kind == Tok::Text ||
               (peek().kind == Tok::Ident && peek().text == "null");
    }

    Value literal() {
        const Token& t = next();
        if (t.kind == Tok::Int) return Value(t.number);
        if (t.kind == Tok::Text) return Value(t.text);
        return Value::null();
    }

    // -- statements ---------------------------------------------------------
    StatementPtr statement() {
        if (is_kw("CHECK")) return check();
        if (is_kw("UPDATE")) return update();
        if (is_kw("VSPLIT")) return vsplit();
        if (is_kw("HSPLIT")) return hsplit();
        fail("expected CHECK, UPDATE, VSPLIT or HSPLIT, found " + describe(peek()));
    }

    StatementPtr check() {
        expect_kw("CHECK");
        expect_kw("VIEW");
        Statement::Check s;
        s.view = identifier("view name");
        expect_kw("EQUALS");
        s.query = query();
        expect_punct(";");
        return make_statement(std::move(s));
    }

    StatementPtr update() {
        const Token start = peek();
        expect_kw("UPDATE");
        Statement::Update s;
        s.src_attrs = attrs();
        expect_kw("IN");
        expect_kw("SOURCE");
        s.src_table = identifier("source table name");
        expect_kw("WITH");
        s.view_attrs = attrs();
        expect_kw("IN");
        expect_kw("VIEW");
        s.view = identifier("view name");
        if (s.src_attrs.size() != s.view_attrs.size()) {
            throw Error(ErrorCode::ArityMismatch,
                        "UPDATE at line " + std::to_string(start.line) + " maps " +
                            std::to_string(s.src_attrs.size()) + " source attributes to " +
                            std::to_string(s.view_attrs.size()) + " view attributes");
        }
        return make_statement(std::move(s));
    }

    StatementPtr braced_statement() {
        expect_punct("{");
        StatementPtr body = statement();
        expect_punct("}");
        return body;
    }

    StatementPtr vsplit() {
        expect_kw("VSPLIT");
        expect_kw("VIEW");
        Statement::VSplit s;
        s.view = identifier("view name");
        expect_kw("WITH");
        do {
            Statement::VSplitBranch b;
            b.attrs = attrs();
            b.body = braced_statement();
            s.branches.push_back(std::move(b));
        } while (at_identifier());
        return make_statement(std::move(s));
    }

    StatementPtr hsplit() {
        expect_kw("HSPLIT");
        expect_kw("VIEW");
        Statement::HSplit s;
        s.view = identifier("view name");
        expect_kw("ON");
        s.split_attr = identifier("split attribute");
        if (!at_literal()) fail("expected a branch literal, found " + describe(peek()));
        std::set<Value> seen;
        while (at_literal()) {
            const Token at = peek();
            Statement::HSplitBranch b;
            b.literal = literal();
            if (!seen.insert(b.literal).second) {
                throw Error(ErrorCode::DuplicateBranchLiteral, "literal " + to_literal(b.literal) +
                                                                   " repeated at line " + std::to_string(at.line));
            }
            b.body = braced_statement();
            s.branches.push_back(std::move(b));
        }
        if (is_kw("OTHERWISE")) {
            next();
            s.otherwise = braced_statement();
        }
        return make_statement(std::move(s));
    }

    // -- SELECT subset ------------------------------------------------------
    struct ColumnRef {
        std::optional<std::string> table;
        std::string attr;
    };
    struct Operand {
        std::optional<ColumnRef> column;
        Value literal;
    };
    struct Condition {
        Operand lhs;
        CmpOp op = CmpOp::Eq;
        std::optional<Operand> rhs;  // empty for IS NULL
        int line = 0;
        int column = 0;
    };

    ColumnRef column_ref() {
        ColumnRef ref;
        ref.attr = identifier("attribute name");
        if (is_punct(".")) {
            next();
            ref.table = ref.attr;
            ref.attr = identifier("attribute name");
        }
        return ref;
    }

    Operand operand() {
        Operand o;
        if (at_literal()) {
            o.literal = literal();
        } else {
            o.column = column_ref();
        }
        return o;
    }

    static CmpOp flip(CmpOp op) {
        switch (op) {
            case CmpOp::Lt: return CmpOp::Gt;
            case CmpOp::Le: return CmpOp::Ge;
            case CmpOp::Gt: return CmpOp::Lt;
            case CmpOp::Ge: return CmpOp::Le;
            default: return op;
        }
    }

    Condition condition() {
        Condition c;
        c.line = peek().line;
        c.column = peek().column;
        c.lhs = operand();
        if (is_kw("IS")) {
            next();
            expect_kw("NULL");
            if (!c.lhs.column) fail("IS NULL needs an attribute");
            return c;
        }
        static const std::map<std::string, CmpOp> ops = {
            {"=", CmpOp::Eq}, {"<", CmpOp::Lt}, {"<=", CmpOp::Le}, {">", CmpOp::Gt}, {">=", CmpOp::Ge}};
        if (peek().kind != Tok::Punct || !ops.count(peek().text))
            fail("expected comparison operator, found " + describe(peek()));
        c.op = ops.at(next().text);
        c.rhs = operand();
        if (!c.lhs.column && !c.rhs->column) fail("condition compares two literals");
        if (!c.lhs.column) {
            std::swap(c.lhs, *c.rhs);
            c.op = flip(c.op);
        }
        return c;
    }

    std::optional<std::string> owner(const ColumnRef& ref, const std::vector<std::string>& tables, int line,
                                     int column) const {
        if (ref.table) {
            if (std::find(tables.begin(), tables.end(), *ref.table) == tables.end())
                throw SyntaxError("table '" + *ref.table + "' is not in FROM", line, column);
            return ref.table;
        }
        if (tables.size() == 1) return tables.front();
        if (!schemas_) return std::nullopt;
        std::vector<std::string> hits;
        for (const auto& t : tables) {
            auto it = schemas_->find(t);
            if (it != schemas_->end() && it->second.has(ref.attr)) hits.push_back(t);
        }
        if (hits.size() > 1)
            throw Error(ErrorCode::AmbiguousAttribute, "attribute '" + ref.attr + "' is in more than one FROM table");
        if (hits.empty()) throw Error(ErrorCode::UnknownAttribute, "attribute '" + ref.attr + "' not in any FROM table");
        return hits.front();
    }

    Query query() {
        expect_kw("SELECT");
        bool star = false;
        std::vector<std::pair<ColumnRef, std::string>> items;
        if (is_punct("*")) {
            next();
            star = true;
        } else {
            do {
                if (!items.empty()) next();
                ColumnRef ref = column_ref();
                std::string alias = ref.attr;
                if (is_kw("AS")) {
                    next();
                    alias = identifier("alias");
                }
                items.emplace_back(std::move(ref), std::move(alias));
            } while (is_punct(","));
        }
        expect_kw("FROM");
        std::vector<std::string> tables{identifier("table name")};
        while (is_punct(",")) {
            next();
            std::string t = identifier("table name");
            if (std::find(tables.begin(), tables.end(), t) != tables.end())
                fail("table '" + t + "' listed twice in FROM");
            tables.push_back(std::move(t));
        }
        std::vector<Condition> conds;
        if (is_kw("WHERE")) {
            next();
            conds.push_back(condition());
            while (is_kw("AND")) {
                next();
                conds.push_back(condition());
            }
        }

        std::map<std::string, Predicate> pushed;
        Predicate top;
        struct Link {
            std::string a_table, a_attr, b_table, b_attr;
        };
        std::vector<Link> links;
        for (const auto& c : conds) {
            auto lo = owner(*c.lhs.column, tables, c.line, c.column);
            if (!c.rhs) {
                Predicate::Atom atom = Predicate::IsNull{c.lhs.column->attr};
                (lo ? pushed[*lo] : top).conjuncts.push_back(std::move(atom));
                continue;
            }
            if (!c.rhs->column) {
                Predicate::Atom atom = Predicate::Compare{c.lhs.column->attr, c.op, c.rhs->literal};
                (lo ? pushed[*lo] : top).conjuncts.push_back(std::move(atom));
                continue;
            }
            auto ro = owner(*c.rhs->column, tables, c.line, c.column);
            if (!lo || !ro) {
                throw Error(ErrorCode::AmbiguousAttribute,
                            "qualify the attributes of condition at line " + std::to_string(c.line));
            }
            if (c.op != CmpOp::Eq) throw SyntaxError("only = may compare two attributes", c.line, c.column);
            if (*lo == *ro) {
                pushed[*lo].conjuncts.push_back(Predicate::AttrEq{c.lhs.column->attr, c.rhs->column->attr});
            } else {
                links.push_back(Link{*lo, c.lhs.column->attr, *ro, c.rhs->column->attr});
            }
        }

        auto leaf = [&](const std::string& t) {
            Query q = base(t);
            auto it = pushed.find(t);
            if (it != pushed.end()) q = select(q, it->second);
            return q;
        };
        Query acc = leaf(tables.front());
        std::vector<std::string> joined{tables.front()};
        for (std::size_t i = 1; i < tables.size(); ++i) {
            const auto& t = tables[i];
            JoinConds jc;
            auto in_acc = [&](const std::string& name) {
                return std::find(joined.begin(), joined.end(), name) != joined.end();
            };
            for (const auto& l : links) {
                if (l.b_table == t && in_acc(l.a_table)) jc.emplace_back(l.a_attr, l.b_attr);
                else if (l.a_table == t && in_acc(l.b_table)) jc.emplace_back(l.b_attr, l.a_attr);
            }
            acc = join(acc, leaf(t), std::move(jc));
            joined.push_back(t);
        }
        if (!top.conjuncts.empty()) acc = select(acc, std::move(top));
        if (star) return acc;
        RenamePairs pairs;
        for (auto& [ref, alias] : items) pairs.emplace_back(ref.attr, alias);
        return project(acc, std::move(pairs));
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    const SchemaMap* schemas_;
};

// -- printing ---------------------------------------------------------------

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ", ";
        out += names[i];
    }
    return out;
}

void print_statement(const Statement& s, int indent, std::ostringstream& out) {
    const std::string pad(indent, ' ');
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Statement::Check>) {
                out << pad << "CHECK VIEW " << x.view << " EQUALS\n"
                    << pad << "  " << render_select(x.query, indent + 2) << ";\n";
            } else if constexpr (std::is_same_v<T, Statement::Update>) {
                out << pad << "UPDATE    " << join_names(x.src_attrs) << "\n"
                    << pad << "IN SOURCE " << x.src_table << "\n"
                    << pad << "WITH      " << join_names(x.view_attrs) << "\n"
                    << pad << "IN VIEW   " << x.view << "\n";
            } else if constexpr (std::is_same_v<T, Statement::VSplit>) {
                out << pad << "VSPLIT VIEW " << x.view << " WITH\n";
                for (const auto& b : x.branches) {
                    out << pad << "  " << join_names(b.attrs) << " {\n";
                    print_statement(*b.body, indent + 4, out);
                    out << pad << "  }\n";
                }
            } else {
                out << pad << "HSPLIT VIEW " << x.view << " ON " << x.split_attr << "\n";
                for (const auto& b : x.branches) {
                    out << pad << "  " << to_literal(b.literal) << " {\n";
                    print_statement(*b.body, indent + 4, out);
                    out << pad << "  }\n";
                }
                if (x.otherwise) {
                    out << pad << "  OTHERWISE {\n";
                    print_statement(*x.otherwise, indent + 4, out);
                    out << pad << "  }\n";
                }
            }
        },
        s.node);
}

}  // namespace

Program parse_program(std::string_view text) { return Parser(text, nullptr).program(); }

Query parse_check_query(std::string_view text, const SchemaMap* schemas) {
    return Parser(text, schemas).standalone_query();
}

std::string render_select(const Query& q, int indent) {
    auto parts = detail::decompose_select(q);
    if (!parts) throw Error(ErrorCode::ValidationFailed, "query is outside the SELECT subset: " + to_algebra(q));
    return detail::format_select(*parts, "", indent);
}

std::string pretty_print(const Program& p) {
    std::ostringstream out;
    print_statement(*p.root, 0, out);
    return out.str();
}

}  // namespace putback
