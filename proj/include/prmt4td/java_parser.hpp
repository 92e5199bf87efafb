#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "prmt4td/tokenizer.hpp"

namespace prmt4td {

/// Syntax tree node. Only node kinds are kept; names and literal values are
/// irrelevant to structural comparison.
struct AstNode {
    std::string_view kind;
    std::vector<AstNode> children;
};

/// Preorder node-kind sequence of a parsed snippet.
struct AstSequence {
    std::vector<std::string> node_kinds;
    std::string source_id;
    bool degraded = false;   ///< parse failed; sequence holds lexeme kinds instead
    bool truncated = false;  ///< sequence was capped at kMaxAstNodes
};

inline constexpr std::size_t kMaxAstNodes = 2000;

class JavaParseError : public std::runtime_error {
public:
    JavaParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

namespace detail {

/// Recursive-descent parser for a practical subset of Java 17. Node kind names
/// follow the javalang conventions (CompilationUnit, ClassDeclaration,
/// MethodInvocation, ...). Ambiguities are resolved by speculative parsing.
class JavaParser {
public:
    explicit JavaParser(std::vector<Lexeme> lexemes) : lex_(std::move(lexemes)) {}

    AstNode compilation_unit() {
        AstNode unit{"CompilationUnit", {}};
        skip_annotations_into(unit.children, /*only_if_package=*/true);
        if (at_keyword("package")) {
            advance();
            AstNode pkg{"PackageDeclaration", {}};
            qualified_name();
            expect(";");
            unit.children.push_back(std::move(pkg));
        }
        while (at_keyword("import")) {
            advance();
            if (at_keyword("static")) advance();
            qualified_name();
            if (accept(".")) expect("*");
            expect(";");
            unit.children.push_back(AstNode{"Import", {}});
        }
        while (!at_end()) {
            if (accept(";")) continue;
            unit.children.push_back(type_declaration());
        }
        return unit;
    }

    /// Class-body members without an enclosing class (method-only snippets).
    AstNode member_fragment() {
        AstNode frag{"MemberFragment", {}};
        while (!at_end()) {
            if (accept(";")) continue;
            member_declaration(frag.children, "");
        }
        return frag;
    }

    /// Bare statements (method-body snippets).
    AstNode statement_fragment() {
        AstNode frag{"StatementFragment", {}};
        while (!at_end()) {
            frag.children.push_back(block_statement());
        }
        return frag;
    }

private:
    struct Backtrack {};

    static constexpr int kMaxDepth = 256;

    std::vector<Lexeme> lex_;
    std::size_t pos_ = 0;
    int speculation_ = 0;
    int depth_ = 0;

    /// Bounds recursion on pathological input (e.g. thousands of '(').
    struct DepthGuard {
        JavaParser& parser;
        explicit DepthGuard(JavaParser& p) : parser(p) {
            if (++parser.depth_ > kMaxDepth) {
                --parser.depth_;
                parser.fail("nesting too deep");
            }
        }
        ~DepthGuard() { --parser.depth_; }
        DepthGuard(const DepthGuard&) = delete;
        DepthGuard& operator=(const DepthGuard&) = delete;
    };

    // ---- token helpers -------------------------------------------------

    bool at_end() const { return pos_ >= lex_.size(); }

    const Lexeme* peek(std::size_t ahead = 0) const {
        return pos_ + ahead < lex_.size() ? &lex_[pos_ + ahead] : nullptr;
    }

    bool at(std::string_view text, std::size_t ahead = 0) const {
        const auto* t = peek(ahead);
        return t != nullptr && t->text == text && t->kind != LexKind::string_literal &&
               t->kind != LexKind::char_literal;
    }

    bool at_keyword(std::string_view word, std::size_t ahead = 0) const {
        const auto* t = peek(ahead);
        return t != nullptr && t->kind == LexKind::keyword && t->text == word;
    }

    bool at_identifier(std::size_t ahead = 0) const {
        const auto* t = peek(ahead);
        return t != nullptr && t->kind == LexKind::identifier;
    }

    bool at_contextual(std::string_view word, std::size_t ahead = 0) const {
        const auto* t = peek(ahead);
        return t != nullptr && t->kind == LexKind::identifier && t->text == word;
    }

    void advance(std::size_t count = 1) { pos_ += count; }

    bool accept(std::string_view text) {
        if (at(text)) {
            advance();
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& what) const {
        if (speculation_ > 0) throw Backtrack{};
        const std::size_t offset = at_end() ? (lex_.empty() ? 0 : lex_.back().offset) : lex_[pos_].offset;
        const std::string found = at_end() ? "end of input" : "'" + lex_[pos_].text + "'";
        throw JavaParseError(what + ", found " + found, offset);
    }

    void expect(std::string_view text) {
        if (!accept(text)) fail("expected '" + std::string(text) + "'");
    }

    void identifier() {
        if (!at_identifier()) fail("expected identifier");
        advance();
    }

    /// Runs `fn` speculatively; on failure restores the position and returns false.
    template <typename Fn>
    bool attempt(Fn&& fn) {
        const std::size_t saved = pos_;
        ++speculation_;
        try {
            fn();
            --speculation_;
            return true;
        } catch (const Backtrack&) {
            --speculation_;
            pos_ = saved;
            return false;
        }
    }

    static bool is_primitive(std::string_view word) {
        for (auto p : {"boolean", "byte", "char", "short", "int", "long", "float", "double"}) {
            if (word == p) return true;
        }
        return false;
    }

    bool at_primitive(std::size_t ahead = 0) const {
        const auto* t = peek(ahead);
        return t != nullptr && t->kind == LexKind::keyword && is_primitive(t->text);
    }

    static bool is_modifier(std::string_view word) {
        for (auto m : {"public", "protected", "private", "static", "abstract", "final", "native",
                       "synchronized", "transient", "volatile", "strictfp", "default"}) {
            if (word == m) return true;
        }
        return false;
    }

    bool at_modifier() const {
        const auto* t = peek();
        if (t == nullptr) return false;
        if (t->kind == LexKind::keyword && is_modifier(t->text)) {
            // `default` is a modifier only inside interfaces, never before ':' or '->'.
            if (t->text == "default") return !at(":", 1) && !at("->", 1);
            return true;
        }
        if (t->kind != LexKind::identifier) return false;
        if (t->text == "sealed") return peek(1) != nullptr && peek(1)->kind == LexKind::keyword;
        return t->text == "non" && at("-", 1) && at_contextual("sealed", 2);
    }

    // ---- names, types, annotations ------------------------------------

    void qualified_name() {
        identifier();
        while (at(".") && at_identifier(1)) advance(2);
    }

    void skip_annotations_into(std::vector<AstNode>& out, bool only_if_package = false) {
        while (at("@") && !at_keyword("interface", 1)) {
            if (only_if_package) {
                // Annotations before a type declaration belong to that declaration.
                std::size_t k = pos_;
                bool package_follows = false;
                attempt([&] {
                    std::vector<AstNode> tmp;
                    while (at("@") && !at_keyword("interface", 1)) tmp.push_back(annotation());
                    package_follows = at_keyword("package");
                    throw Backtrack{};
                });
                pos_ = k;
                if (!package_follows) return;
            }
            out.push_back(annotation());
        }
    }

    AstNode annotation() {
        expect("@");
        AstNode node{"Annotation", {}};
        qualified_name();
        if (accept("(")) {
            if (!at(")")) {
                if (at_identifier() && at("=", 1)) {
                    do {
                        identifier();
                        expect("=");
                        AstNode pair{"ElementValuePair", {}};
                        pair.children.push_back(element_value());
                        node.children.push_back(std::move(pair));
                    } while (accept(","));
                } else {
                    node.children.push_back(element_value());
                }
            }
            expect(")");
        }
        return node;
    }

    AstNode element_value() {
        if (at("@")) return annotation();
        if (at("{")) {
            advance();
            AstNode arr{"ElementArrayValue", {}};
            while (!at("}")) {
                arr.children.push_back(element_value());
                if (!accept(",")) break;
            }
            expect("}");
            return arr;
        }
        return ternary_expression();
    }

    /// Modifiers and annotations; annotations become nodes, keywords do not.
    void modifiers(std::vector<AstNode>& out) {
        while (true) {
            if (at("@") && !at_keyword("interface", 1)) {
                out.push_back(annotation());
            } else if (at_modifier()) {
                if (at_contextual("non")) advance(3);
                else advance();
            } else {
                return;
            }
        }
    }

    void dims() {
        while (true) {
            std::vector<AstNode> ignored;
            const std::size_t saved = pos_;
            while (at("@")) ignored.push_back(annotation());
            if (at("[") && at("]", 1)) {
                advance(2);
            } else {
                pos_ = saved;
                return;
            }
        }
    }

    /// Closes a type-argument list. Adjacent '>' lexemes are kept separate by
    /// the lexer, so '>>' needs no splitting here.
    void close_angle() { expect(">"); }

    AstNode type_arguments_node() {
        expect("<");
        AstNode args{"TypeArguments", {}};
        if (at(">")) {  // diamond
            advance();
            return args;
        }
        do {
            std::vector<AstNode> annos;
            while (at("@")) annos.push_back(annotation());
            AstNode arg{"TypeArgument", std::move(annos)};
            if (accept("?")) {
                if (at_keyword("extends") || at_keyword("super")) {
                    advance();
                    arg.children.push_back(type());
                }
            } else {
                arg.children.push_back(type());
            }
            args.children.push_back(std::move(arg));
        } while (accept(","));
        close_angle();
        return args;
    }

    AstNode type() {
        std::vector<AstNode> annos;
        while (at("@")) annos.push_back(annotation());
        if (at_primitive()) {
            advance();
            AstNode basic{"BasicType", std::move(annos)};
            dims();
            return basic;
        }
        if (!at_identifier()) fail("expected type");
        AstNode ref{"ReferenceType", std::move(annos)};
        identifier();
        if (at("<")) {
            for (auto& a : type_arguments_node().children) ref.children.push_back(std::move(a));
        }
        while (at(".") && (at_identifier(1) || at("@", 1))) {
            advance();
            while (at("@")) ref.children.push_back(annotation());
            identifier();
            if (at("<")) {
                for (auto& a : type_arguments_node().children) ref.children.push_back(std::move(a));
            }
        }
        dims();
        return ref;
    }

    void type_list(std::vector<AstNode>& out) {
        do {
            out.push_back(type());
        } while (accept(","));
    }

    void type_parameters(std::vector<AstNode>& out) {
        expect("<");
        do {
            std::vector<AstNode> annos;
            while (at("@")) annos.push_back(annotation());
            AstNode param{"TypeParameter", std::move(annos)};
            identifier();
            if (at_keyword("extends")) {
                advance();
                do {
                    param.children.push_back(type());
                } while (accept("&"));
            }
            out.push_back(std::move(param));
        } while (accept(","));
        close_angle();
    }

    // ---- declarations --------------------------------------------------

    bool at_type_declaration_start() const {
        return at_keyword("class") || at_keyword("interface") || at_keyword("enum") ||
               (at("@") && at_keyword("interface", 1)) ||
               (at_contextual("record") && at_identifier(1) && (at("(", 2) || at("<", 2)));
    }

    AstNode type_declaration() {
        std::vector<AstNode> annos;
        modifiers(annos);
        if (!at_type_declaration_start()) fail("expected type declaration");
        return type_declaration_body(std::move(annos));
    }

    AstNode type_declaration_body(std::vector<AstNode> annos) {
        if (at_keyword("class")) return class_declaration(std::move(annos));
        if (at_keyword("interface")) return interface_declaration(std::move(annos));
        if (at_keyword("enum")) return enum_declaration(std::move(annos));
        if (at("@") && at_keyword("interface", 1)) return annotation_declaration(std::move(annos));
        if (at_contextual("record")) return record_declaration(std::move(annos));
        fail("expected type declaration");
    }

    void permits_clause(std::vector<AstNode>& out) {
        if (at_contextual("permits")) {
            advance();
            type_list(out);
        }
    }

    AstNode class_declaration(std::vector<AstNode> annos) {
        expect("class");
        AstNode node{"ClassDeclaration", std::move(annos)};
        const std::string name = lex_[pos_].text;
        identifier();
        if (at("<")) type_parameters(node.children);
        if (at_keyword("extends")) {
            advance();
            node.children.push_back(type());
        }
        if (at_keyword("implements")) {
            advance();
            type_list(node.children);
        }
        permits_clause(node.children);
        class_body(node.children, name);
        return node;
    }

    AstNode interface_declaration(std::vector<AstNode> annos) {
        expect("interface");
        AstNode node{"InterfaceDeclaration", std::move(annos)};
        const std::string name = lex_[pos_].text;
        identifier();
        if (at("<")) type_parameters(node.children);
        if (at_keyword("extends")) {
            advance();
            type_list(node.children);
        }
        permits_clause(node.children);
        class_body(node.children, name);
        return node;
    }

    AstNode annotation_declaration(std::vector<AstNode> annos) {
        expect("@");
        expect("interface");
        AstNode node{"AnnotationDeclaration", std::move(annos)};
        const std::string name = lex_[pos_].text;
        identifier();
        class_body(node.children, name);
        return node;
    }

    AstNode record_declaration(std::vector<AstNode> annos) {
        advance();  // record
        AstNode node{"RecordDeclaration", std::move(annos)};
        const std::string name = lex_[pos_].text;
        identifier();
        if (at("<")) type_parameters(node.children);
        expect("(");
        if (!at(")")) {
            do {
                node.children.push_back(formal_parameter());
            } while (accept(","));
        }
        expect(")");
        if (at_keyword("implements")) {
            advance();
            type_list(node.children);
        }
        class_body(node.children, name);
        return node;
    }

    AstNode enum_declaration(std::vector<AstNode> annos) {
        expect("enum");
        AstNode node{"EnumDeclaration", std::move(annos)};
        const std::string name = lex_[pos_].text;
        identifier();
        if (at_keyword("implements")) {
            advance();
            type_list(node.children);
        }
        expect("{");
        AstNode body{"EnumBody", {}};
        while (!at(";") && !at("}")) {
            std::vector<AstNode> constant_annos;
            while (at("@")) constant_annos.push_back(annotation());
            AstNode constant{"EnumConstantDeclaration", std::move(constant_annos)};
            identifier();
            if (at("(")) arguments(constant.children);
            if (at("{")) {
                AstNode anon{"ClassBody", {}};
                class_body(anon.children, name);
                constant.children.push_back(std::move(anon));
            }
            body.children.push_back(std::move(constant));
            if (!accept(",")) break;
        }
        if (accept(";")) {
            while (!at("}")) {
                if (at_end()) fail("unterminated enum body");
                if (accept(";")) continue;
                member_declaration(body.children, name);
            }
        }
        expect("}");
        node.children.push_back(std::move(body));
        return node;
    }

    void class_body(std::vector<AstNode>& out, const std::string& class_name) {
        DepthGuard guard(*this);
        expect("{");
        while (!at("}")) {
            if (at_end()) fail("unterminated class body");
            if (accept(";")) continue;
            member_declaration(out, class_name);
        }
        expect("}");
    }

    void member_declaration(std::vector<AstNode>& out, const std::string& class_name) {
        if (at("{")) {
            out.push_back(block_node("InitializerBlock"));
            return;
        }
        if (at_keyword("static") && at("{", 1)) {
            advance();
            out.push_back(block_node("StaticInitializer"));
            return;
        }
        std::vector<AstNode> annos;
        modifiers(annos);
        if (at_type_declaration_start()) {
            out.push_back(type_declaration_body(std::move(annos)));
            return;
        }
        std::vector<AstNode> type_params;
        if (at("<")) type_parameters(type_params);

        // Constructor: Name '(' ... ; record compact constructor: Name '{'.
        if (at_identifier() && at("(", 1) && (class_name.empty() || lex_[pos_].text == class_name)) {
            AstNode ctor{"ConstructorDeclaration", std::move(annos)};
            for (auto& tp : type_params) ctor.children.push_back(std::move(tp));
            identifier();
            formal_parameters(ctor.children);
            throws_clause(ctor.children);
            block_statements_into(ctor.children);
            out.push_back(std::move(ctor));
            return;
        }
        if (at_identifier() && at("{", 1) && lex_[pos_].text == class_name) {
            AstNode ctor{"ConstructorDeclaration", std::move(annos)};
            identifier();
            block_statements_into(ctor.children);
            out.push_back(std::move(ctor));
            return;
        }

        AstNode method{"MethodDeclaration", std::move(annos)};
        for (auto& tp : type_params) method.children.push_back(std::move(tp));
        if (at_keyword("void")) {
            advance();
        } else {
            AstNode return_type = type();
            if (at_identifier() && !at("(", 1)) {
                // Field declaration.
                AstNode field{"FieldDeclaration", std::move(method.children)};
                field.children.push_back(std::move(return_type));
                variable_declarators(field.children);
                expect(";");
                out.push_back(std::move(field));
                return;
            }
            method.children.push_back(std::move(return_type));
        }
        identifier();
        formal_parameters(method.children);
        dims();
        throws_clause(method.children);
        if (at_keyword("default")) {
            advance();
            method.children.push_back(element_value());
            expect(";");
        } else if (!accept(";")) {
            block_statements_into(method.children);
        }
        out.push_back(std::move(method));
    }

    void throws_clause(std::vector<AstNode>& out) {
        if (at_keyword("throws")) {
            advance();
            do {
                qualified_name();
                out.push_back(AstNode{"ThrowsType", {}});
            } while (accept(","));
        }
    }

    void formal_parameters(std::vector<AstNode>& out) {
        expect("(");
        if (!at(")")) {
            do {
                out.push_back(formal_parameter());
            } while (accept(","));
        }
        expect(")");
    }

    AstNode formal_parameter() {
        std::vector<AstNode> annos;
        modifiers(annos);
        AstNode param{"FormalParameter", std::move(annos)};
        param.children.push_back(type());
        accept("...");
        if (at_keyword("this")) {  // receiver parameter
            advance();
        } else {
            identifier();
            dims();
        }
        return param;
    }

    void variable_declarators(std::vector<AstNode>& out) {
        do {
            AstNode decl{"VariableDeclarator", {}};
            identifier();
            dims();
            if (accept("=")) decl.children.push_back(variable_initializer());
            out.push_back(std::move(decl));
        } while (accept(","));
    }

    AstNode variable_initializer() {
        if (at("{")) return array_initializer();
        return expression();
    }

    AstNode array_initializer() {
        expect("{");
        AstNode node{"ArrayInitializer", {}};
        while (!at("}")) {
            node.children.push_back(variable_initializer());
            if (!accept(",")) break;
        }
        expect("}");
        return node;
    }

    // ---- statements ------------------------------------------------------

    AstNode block_node(std::string_view kind) {
        AstNode node{kind, {}};
        block_statements_into(node.children);
        return node;
    }

    void block_statements_into(std::vector<AstNode>& out) {
        expect("{");
        while (!at("}")) {
            if (at_end()) fail("unterminated block");
            out.push_back(block_statement());
        }
        expect("}");
    }

    bool looks_like_local_variable() {
        const std::size_t saved = pos_;
        bool ok = attempt([&] {
            std::vector<AstNode> annos;
            modifiers(annos);
            type();
            if (!at_identifier()) fail("not a declaration");
            advance();
            if (!(at("=") || at(",") || at(";") || at("[") || at(":"))) fail("not a declaration");
        });
        pos_ = saved;
        return ok;
    }

    AstNode local_variable_declaration() {
        std::vector<AstNode> annos;
        modifiers(annos);
        AstNode node{"LocalVariableDeclaration", std::move(annos)};
        node.children.push_back(type());
        variable_declarators(node.children);
        return node;
    }

    AstNode block_statement() {
        if ((at_keyword("final") || at("@") || at_keyword("abstract") || at_keyword("static")) ||
            at_type_declaration_start()) {
            const std::size_t saved = pos_;
            std::vector<AstNode> annos;
            modifiers(annos);
            if (at_type_declaration_start()) return type_declaration_body(std::move(annos));
            pos_ = saved;
        }
        if (!(at_identifier() && at(":", 1)) && (at_primitive() || at_identifier() || at("@") ||
                                                   at_keyword("final")) &&
            looks_like_local_variable()) {
            AstNode decl = local_variable_declaration();
            expect(";");
            return decl;
        }
        return statement();
    }

    AstNode parenthesized_condition() {
        expect("(");
        AstNode e = expression();
        expect(")");
        return e;
    }

    AstNode statement() {
        DepthGuard guard(*this);
        if (at("{")) return block_node("BlockStatement");
        if (accept(";")) return AstNode{"Statement", {}};
        if (at_identifier() && at(":", 1)) {  // labeled statement
            advance(2);
            return statement();
        }
        if (at_keyword("if")) {
            advance();
            AstNode node{"IfStatement", {}};
            node.children.push_back(parenthesized_condition());
            node.children.push_back(statement());
            if (at_keyword("else")) {
                advance();
                node.children.push_back(statement());
            }
            return node;
        }
        if (at_keyword("while")) {
            advance();
            AstNode node{"WhileStatement", {}};
            node.children.push_back(parenthesized_condition());
            node.children.push_back(statement());
            return node;
        }
        if (at_keyword("do")) {
            advance();
            AstNode node{"DoStatement", {}};
            node.children.push_back(statement());
            if (!at_keyword("while")) fail("expected 'while'");
            advance();
            node.children.push_back(parenthesized_condition());
            expect(";");
            return node;
        }
        if (at_keyword("for")) return for_statement();
        if (at_keyword("return")) {
            advance();
            AstNode node{"ReturnStatement", {}};
            if (!at(";")) node.children.push_back(expression());
            expect(";");
            return node;
        }
        if (at_keyword("throw")) {
            advance();
            AstNode node{"ThrowStatement", {}};
            node.children.push_back(expression());
            expect(";");
            return node;
        }
        if (at_keyword("break") || at_keyword("continue")) {
            AstNode node{at_keyword("break") ? "BreakStatement" : "ContinueStatement", {}};
            advance();
            if (at_identifier()) advance();
            expect(";");
            return node;
        }
        if (at_keyword("try")) return try_statement();
        if (at_keyword("switch")) {
            AstNode node = switch_construct("SwitchStatement");
            return node;
        }
        if (at_keyword("synchronized")) {
            advance();
            AstNode node{"SynchronizedStatement", {}};
            node.children.push_back(parenthesized_condition());
            block_statements_into(node.children);
            return node;
        }
        if (at_keyword("assert")) {
            advance();
            AstNode node{"AssertStatement", {}};
            node.children.push_back(expression());
            if (accept(":")) node.children.push_back(expression());
            expect(";");
            return node;
        }
        if (at_contextual("yield") && !at("=", 1) && !at(".", 1) && !at("(", 1)) {
            advance();
            AstNode node{"YieldStatement", {}};
            node.children.push_back(expression());
            expect(";");
            return node;
        }
        AstNode node{"StatementExpression", {}};
        node.children.push_back(expression());
        expect(";");
        return node;
    }

    AstNode for_statement() {
        advance();  // for
        expect("(");
        AstNode node{"ForStatement", {}};
        bool enhanced = false;
        {
            const std::size_t saved = pos_;
            enhanced = attempt([&] {
                std::vector<AstNode> annos;
                modifiers(annos);
                type();
                identifier();
                dims();
                expect(":");
            });
            pos_ = saved;
        }
        if (enhanced) {
            AstNode control{"EnhancedForControl", {}};
            std::vector<AstNode> annos;
            modifiers(annos);
            AstNode var{"VariableDeclaration", std::move(annos)};
            var.children.push_back(type());
            identifier();
            dims();
            var.children.push_back(AstNode{"VariableDeclarator", {}});
            control.children.push_back(std::move(var));
            expect(":");
            control.children.push_back(expression());
            node.children.push_back(std::move(control));
        } else {
            AstNode control{"ForControl", {}};
            if (!at(";")) {
                if (looks_like_local_variable()) {
                    AstNode decl = local_variable_declaration();
                    decl.kind = "VariableDeclaration";
                    control.children.push_back(std::move(decl));
                } else {
                    do {
                        control.children.push_back(expression());
                    } while (accept(","));
                }
            }
            expect(";");
            if (!at(";")) control.children.push_back(expression());
            expect(";");
            if (!at(")")) {
                do {
                    control.children.push_back(expression());
                } while (accept(","));
            }
            node.children.push_back(std::move(control));
        }
        expect(")");
        node.children.push_back(statement());
        return node;
    }

    AstNode try_statement() {
        advance();  // try
        AstNode node{"TryStatement", {}};
        if (accept("(")) {
            while (!at(")")) {
                AstNode resource{"TryResource", {}};
                if (looks_like_local_variable()) {
                    std::vector<AstNode> annos;
                    modifiers(annos);
                    for (auto& a : annos) resource.children.push_back(std::move(a));
                    resource.children.push_back(type());
                    identifier();
                    expect("=");
                    resource.children.push_back(expression());
                } else {
                    resource.children.push_back(expression());
                }
                node.children.push_back(std::move(resource));
                if (!accept(";")) break;
            }
            expect(")");
        }
        AstNode body{"BlockStatement", {}};
        block_statements_into(body.children);
        node.children.push_back(std::move(body));
        bool has_handler = false;
        while (at_keyword("catch")) {
            has_handler = true;
            advance();
            expect("(");
            AstNode clause{"CatchClause", {}};
            std::vector<AstNode> annos;
            modifiers(annos);
            AstNode param{"CatchClauseParameter", std::move(annos)};
            do {
                qualified_name();
            } while (accept("|"));
            identifier();
            expect(")");
            clause.children.push_back(std::move(param));
            block_statements_into(clause.children);
            node.children.push_back(std::move(clause));
        }
        if (at_keyword("finally")) {
            has_handler = true;
            advance();
            node.children.push_back(block_node("FinallyBlock"));
        }
        if (!has_handler && node.children.size() == 1) fail("try without catch or finally");
        return node;
    }

    /// `switch` statement or expression; `kind` selects the node name.
    AstNode switch_construct(std::string_view kind) {
        advance();  // switch
        AstNode node{kind, {}};
        node.children.push_back(parenthesized_condition());
        expect("{");
        while (!at("}")) {
            if (at_end()) fail("unterminated switch");
            AstNode group{"SwitchStatementCase", {}};
            bool arrow = false;
            do {
                if (at_keyword("default")) {
                    advance();
                } else if (at_keyword("case")) {
                    advance();
                    do {
                        if (at_keyword("default")) {
                            advance();
                        } else {
                            group.children.push_back(case_label());
                        }
                    } while (accept(","));
                } else {
                    fail("expected 'case' or 'default'");
                }
                if (accept("->")) {
                    arrow = true;
                    break;
                }
                expect(":");
            } while (at_keyword("case") || at_keyword("default"));
            if (arrow) {
                if (at("{")) {
                    group.children.push_back(block_node("BlockStatement"));
                } else if (at_keyword("throw")) {
                    group.children.push_back(statement());
                } else {
                    AstNode expr{"StatementExpression", {}};
                    expr.children.push_back(expression());
                    expect(";");
                    group.children.push_back(std::move(expr));
                }
            } else {
                while (!at_keyword("case") && !at_keyword("default") && !at("}")) {
                    if (at_end()) fail("unterminated switch group");
                    group.children.push_back(block_statement());
                }
            }
            node.children.push_back(std::move(group));
        }
        expect("}");
        return node;
    }

    AstNode case_label() {
        // Type pattern `case Foo f ->` or a constant expression.
        const std::size_t saved = pos_;
        AstNode pattern{"TypePattern", {}};
        if (attempt([&] {
                pattern.children.push_back(type());
                identifier();
                if (!at("->") && !at(":") && !at(",")) fail("not a pattern");
            })) {
            return pattern;
        }
        pos_ = saved;
        return ternary_expression();
    }

    // ---- expressions -----------------------------------------------------

    static bool is_assignment_op(std::string_view op) {
        for (auto a : {"=", "+=", "-=", "*=", "/=", "&=", "|=", "^=", "%=", "<<=", ">>=", ">>>="}) {
            if (op == a) return true;
        }
        return false;
    }

    /// Current operator with adjacent '>' lexemes merged; sets `width` to the
    /// number of lexemes it spans.
    std::string current_operator(std::size_t& width) const {
        width = 0;
        const auto* t = peek();
        if (t == nullptr || t->kind != LexKind::op) return {};
        if (t->text == ">") {
            width = merged_gt_length(lex_, pos_);
            std::string merged;
            for (std::size_t j = 0; j < width; ++j) merged += lex_[pos_ + j].text;
            return merged;
        }
        width = 1;
        return t->text;
    }

    AstNode expression() {
        DepthGuard guard(*this);
        if (lambda_ahead()) return lambda();
        AstNode lhs = ternary_expression();
        std::size_t width = 0;
        const std::string op = current_operator(width);
        if (!op.empty() && is_assignment_op(op)) {
            advance(width);
            AstNode assign{"Assignment", {}};
            assign.children.push_back(std::move(lhs));
            assign.children.push_back(expression());
            return assign;
        }
        return lhs;
    }

    bool lambda_ahead() const {
        if (at_identifier() && at("->", 1)) return true;
        if (!at("(")) return false;
        int depth = 0;
        for (std::size_t k = pos_; k < lex_.size(); ++k) {
            const auto& t = lex_[k];
            if (t.kind == LexKind::separator && t.text == "(") ++depth;
            if (t.kind == LexKind::separator && t.text == ")") {
                if (--depth == 0) {
                    return k + 1 < lex_.size() && lex_[k + 1].text == "->";
                }
            }
        }
        return false;
    }

    AstNode lambda() {
        AstNode node{"LambdaExpression", {}};
        if (at_identifier()) {
            advance();
            node.children.push_back(AstNode{"InferredFormalParameter", {}});
        } else {
            expect("(");
            if (!at(")")) {
                const bool inferred = at_identifier() && (at(",", 1) || at(")", 1));
                do {
                    if (inferred) {
                        identifier();
                        node.children.push_back(AstNode{"InferredFormalParameter", {}});
                    } else {
                        node.children.push_back(formal_parameter());
                    }
                } while (accept(","));
            }
            expect(")");
        }
        expect("->");
        if (at("{")) {
            node.children.push_back(block_node("BlockStatement"));
        } else {
            node.children.push_back(expression());
        }
        return node;
    }

    AstNode ternary_expression() {
        AstNode cond = binary_expression(0);
        if (accept("?")) {
            AstNode node{"TernaryExpression", {}};
            node.children.push_back(std::move(cond));
            node.children.push_back(lambda_ahead() ? lambda() : ternary_expression());
            expect(":");
            node.children.push_back(lambda_ahead() ? lambda() : ternary_expression());
            return node;
        }
        return cond;
    }

    static int binary_precedence(std::string_view op) {
        if (op == "||") return 1;
        if (op == "&&") return 2;
        if (op == "|") return 3;
        if (op == "^") return 4;
        if (op == "&") return 5;
        if (op == "==" || op == "!=") return 6;
        if (op == "<" || op == ">" || op == "<=" || op == ">=") return 7;
        if (op == "<<" || op == ">>" || op == ">>>") return 8;
        if (op == "+" || op == "-") return 9;
        if (op == "*" || op == "/" || op == "%") return 10;
        return -1;
    }

    AstNode binary_expression(int min_prec) {
        AstNode lhs = unary_expression();
        while (true) {
            if (at_keyword("instanceof")) {
                if (7 < min_prec) break;
                advance();
                AstNode node{"InstanceOf", {}};
                node.children.push_back(std::move(lhs));
                if (at_keyword("final")) advance();
                node.children.push_back(type());
                if (at_identifier()) advance();  // pattern binding
                lhs = std::move(node);
                continue;
            }
            std::size_t width = 0;
            const std::string op = current_operator(width);
            const int prec = binary_precedence(op);
            if (prec < 0 || prec < min_prec) break;
            advance(width);
            AstNode node{"BinaryOperation", {}};
            node.children.push_back(std::move(lhs));
            node.children.push_back(binary_expression(prec + 1));
            lhs = std::move(node);
        }
        return lhs;
    }

    bool cast_ahead() {
        if (!at("(")) return false;
        const std::size_t saved = pos_;
        bool is_cast = false;
        attempt([&] {
            advance();
            if (at_primitive()) {
                type();
                expect(")");
                is_cast = true;
                return;
            }
            type();
            while (accept("&")) type();
            expect(")");
            // A reference cast must be followed by something that cannot
            // continue a parenthesized expression.
            const auto* next = peek();
            if (next == nullptr) fail("no operand");
            if (next->kind == LexKind::identifier || next->kind == LexKind::number ||
                next->kind == LexKind::string_literal || next->kind == LexKind::char_literal) {
                is_cast = true;
            } else if (next->kind == LexKind::keyword) {
                is_cast = next->text == "this" || next->text == "super" || next->text == "new" ||
                          next->text == "true" || next->text == "false" || next->text == "null" ||
                          next->text == "switch" || is_primitive(next->text);
            } else {
                is_cast = next->text == "(" || next->text == "!" || next->text == "~";
            }
        });
        pos_ = saved;
        return is_cast;
    }

    AstNode unary_expression() {
        DepthGuard guard(*this);
        std::size_t width = 0;
        const std::string op = current_operator(width);
        if (op == "++" || op == "--" || op == "+" || op == "-" || op == "!" || op == "~") {
            advance(width);
            return unary_expression();
        }
        if (cast_ahead()) {
            advance();  // (
            AstNode node{"Cast", {}};
            node.children.push_back(type());
            while (accept("&")) node.children.push_back(type());
            expect(")");
            node.children.push_back(lambda_ahead() ? lambda() : unary_expression());
            return node;
        }
        AstNode expr = primary();
        while (at("++") || at("--")) advance();
        return expr;
    }

    void arguments(std::vector<AstNode>& out) {
        expect("(");
        if (!at(")")) {
            do {
                out.push_back(expression());
            } while (accept(","));
        }
        expect(")");
    }

    /// Trailing `.member`, `.method(...)`, `[index]`, `::ref` selectors.
    void selectors(AstNode& owner) {
        while (true) {
            if (at(".")) {
                advance();
                if (at("<")) {
                    type_arguments_node();
                    AstNode call{"MethodInvocation", {}};
                    identifier();
                    arguments(call.children);
                    owner.children.push_back(std::move(call));
                } else if (at_keyword("new")) {
                    owner.children.push_back(creator("InnerClassCreator"));
                } else if (at_keyword("this")) {
                    advance();
                    owner.children.push_back(AstNode{"This", {}});
                } else if (at_keyword("class")) {
                    advance();
                    owner.children.push_back(AstNode{"ClassReference", {}});
                } else if (at_keyword("super")) {
                    advance();
                    AstNode sup{"SuperMemberReference", {}};
                    if (at("(")) {
                        sup.kind = "SuperConstructorInvocation";
                        arguments(sup.children);
                    } else if (at("::")) {
                        advance();
                        identifier();
                        sup.kind = "MethodReference";
                    } else {
                        expect(".");
                        identifier();
                        if (at("(")) {
                            sup.kind = "SuperMethodInvocation";
                            arguments(sup.children);
                        }
                    }
                    owner.children.push_back(std::move(sup));
                } else {
                    identifier();
                    if (at("(")) {
                        AstNode call{"MethodInvocation", {}};
                        arguments(call.children);
                        owner.children.push_back(std::move(call));
                    } else {
                        owner.children.push_back(AstNode{"MemberReference", {}});
                    }
                }
            } else if (at("[")) {
                advance();
                AstNode sel{"ArraySelector", {}};
                sel.children.push_back(expression());
                expect("]");
                owner.children.push_back(std::move(sel));
            } else if (at("::")) {
                advance();
                if (at("<")) type_arguments_node();
                if (at_keyword("new")) advance();
                else identifier();
                owner.children.push_back(AstNode{"MethodReference", {}});
            } else {
                return;
            }
        }
    }

    AstNode creator(std::string_view kind) {
        expect("new");
        std::vector<AstNode> annos;
        if (at("<")) type_arguments_node();
        while (at("@")) annos.push_back(annotation());
        AstNode created_type = [&] {
            if (at_primitive()) {
                advance();
                return AstNode{"BasicType", {}};
            }
            AstNode ref{"ReferenceType", {}};
            identifier();
            if (at("<")) {
                for (auto& a : type_arguments_node().children) ref.children.push_back(std::move(a));
            }
            while (at(".") && at_identifier(1)) {
                advance(2);
                if (at("<")) {
                    for (auto& a : type_arguments_node().children) ref.children.push_back(std::move(a));
                }
            }
            return ref;
        }();
        if (at("[")) {
            AstNode arr{"ArrayCreator", std::move(annos)};
            arr.children.push_back(std::move(created_type));
            while (at("[")) {
                advance();
                if (at("]")) {
                    advance();
                } else {
                    arr.children.push_back(expression());
                    expect("]");
                }
            }
            if (at("{")) arr.children.push_back(array_initializer());
            return arr;
        }
        AstNode node{kind, std::move(annos)};
        node.children.push_back(std::move(created_type));
        arguments(node.children);
        if (at("{")) {
            AstNode body{"ClassBody", {}};
            class_body(body.children, "");
            node.children.push_back(std::move(body));
        }
        return node;
    }

    AstNode primary() {
        const auto* t = peek();
        if (t == nullptr) fail("expected expression");
        AstNode node{"", {}};
        switch (t->kind) {
        case LexKind::number:
        case LexKind::string_literal:
        case LexKind::char_literal:
            advance();
            node.kind = "Literal";
            break;
        case LexKind::keyword:
            if (t->text == "true" || t->text == "false" || t->text == "null") {
                advance();
                node.kind = "Literal";
            } else if (t->text == "this") {
                advance();
                node.kind = "This";
                if (at("(")) {
                    node.kind = "ExplicitConstructorInvocation";
                    arguments(node.children);
                }
            } else if (t->text == "super") {
                advance();
                if (at("(")) {
                    node.kind = "SuperConstructorInvocation";
                    arguments(node.children);
                } else if (accept("::")) {
                    identifier();
                    node.kind = "MethodReference";
                } else {
                    expect(".");
                    if (at("<")) type_arguments_node();
                    identifier();
                    node.kind = "SuperMemberReference";
                    if (at("(")) {
                        node.kind = "SuperMethodInvocation";
                        arguments(node.children);
                    }
                }
            } else if (t->text == "new") {
                node = creator("ClassCreator");
            } else if (t->text == "switch") {
                node = switch_construct("SwitchExpression");
            } else if (is_primitive(t->text) || t->text == "void") {
                advance();
                dims();
                if (at("::")) {
                    advance();
                    expect("new");
                    node.kind = "MethodReference";
                } else {
                    expect(".");
                    if (!at_keyword("class")) fail("expected 'class'");
                    advance();
                    node.kind = "ClassReference";
                }
            } else {
                fail("unexpected keyword");
            }
            break;
        case LexKind::identifier: {
            // Generic type followed by '::' (e.g. List<String>::size).
            const std::size_t saved = pos_;
            if (at("<", 1) && attempt([&] {
                    type();
                    if (!at("::")) fail("not a method reference");
                })) {
                advance();
                if (at_keyword("new")) advance();
                else identifier();
                node.kind = "MethodReference";
                break;
            }
            pos_ = saved;
            advance();
            while (at(".") && at_identifier(1) && !at("(", 2)) advance(2);
            if (at(".") && at_identifier(1) && at("(", 2)) advance(2);
            if (at("[") && at("]", 1)) {
                dims();
                expect(".");
                if (!at_keyword("class")) fail("expected 'class'");
                advance();
                node.kind = "ClassReference";
            } else if (at("(")) {
                node.kind = "MethodInvocation";
                arguments(node.children);
            } else {
                node.kind = "MemberReference";
            }
            break;
        }
        case LexKind::separator:
            if (t->text == "(") {
                advance();
                node = expression();
                expect(")");
                break;
            }
            fail("expected expression");
        case LexKind::op:
        case LexKind::unknown:
            fail("expected expression");
        }
        selectors(node);
        return node;
    }
};

inline void flatten_preorder(const AstNode& node, AstSequence& out) {
    if (out.node_kinds.size() >= kMaxAstNodes) {
        out.truncated = true;
        return;
    }
    out.node_kinds.emplace_back(node.kind);
    for (const auto& child : node.children) {
        flatten_preorder(child, out);
    }
}

}  // namespace detail

/// Parses Java source into a syntax tree. Tries a full compilation unit first,
/// then class-body members, then bare statements. Throws JavaParseError with
/// the compilation-unit error when all three fail.
inline AstNode parse_java(std::string_view code) {
    auto lexemes = lex_java(code);
    for (const auto& l : lexemes) {
        if (l.kind == LexKind::unknown) {
            throw JavaParseError("unexpected character '" + l.text + "'", l.offset);
        }
    }
    try {
        return detail::JavaParser(lexemes).compilation_unit();
    } catch (const JavaParseError& unit_error) {
        try {
            return detail::JavaParser(lexemes).member_fragment();
        } catch (const JavaParseError&) {
        }
        try {
            return detail::JavaParser(lexemes).statement_fragment();
        } catch (const JavaParseError&) {
        }
        throw;
    }
}

/// Preorder node kinds of `code`. Unparseable input degrades to the sequence
/// of lexeme kinds with `degraded` set; output is capped at kMaxAstNodes.
inline AstSequence parse_ast_sequence(std::string_view code, std::string source_id = {}) {
    AstSequence seq;
    seq.source_id = std::move(source_id);
    try {
        const AstNode root = parse_java(code);
        detail::flatten_preorder(root, seq);
    } catch (const JavaParseError&) {
        seq.node_kinds.clear();
        seq.truncated = false;
        seq.degraded = true;
        for (const auto& l : lex_java(code)) {
            if (seq.node_kinds.size() >= kMaxAstNodes) {
                seq.truncated = true;
                break;
            }
            seq.node_kinds.emplace_back(lex_kind_name(l.kind));
        }
    }
    return seq;
}

}  // namespace prmt4td
