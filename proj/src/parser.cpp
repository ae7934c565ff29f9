#include "sessint/parser.hpp"

#include <cctype>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace sessint {

namespace {

// ---- lexer ------------------------------------------------------------------

enum class Tok : uint8_t {
    End, Ident, Int, Str, HashName,
    LBrace, RBrace, LParen, RParen, LBracket, RBracket,
    Comma, Semi, Colon, Arrow, Assign, Eq, Plus, At, Caret, Slash,
    OrOp, AndOp  // the label connectives
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    int64_t num = 0;
    Pos pos;
};

class Lexer {
  public:
    explicit Lexer(const std::string& src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }
    Token next() {
        Token t = tok_;
        advance();
        return t;
    }

  private:
    void advance() {
        skip_ws();
        tok_ = Token{};
        tok_.pos = {line_, static_cast<int>(i_ - line_start_) + 1};
        if (i_ >= src_.size()) return;
        char c = src_[i_];
        auto two = [&](char a, char b) {
            return c == a && i_ + 1 < src_.size() && src_[i_ + 1] == b;
        };
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t j = i_;
            while (j < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_'))
                ++j;
            tok_.kind = Tok::Ident;
            tok_.text = src_.substr(i_, j - i_);
            i_ = j;
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t j = i_;
            while (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) ++j;
            tok_.kind = Tok::Int;
            tok_.num = std::stoll(src_.substr(i_, j - i_));
            i_ = j;
            return;
        }
        if (c == '"') {
            size_t j = i_ + 1;
            while (j < src_.size() && src_[j] != '"') ++j;
            if (j >= src_.size()) throw ParseError("unterminated string", tok_.pos);
            tok_.kind = Tok::Str;
            tok_.text = src_.substr(i_ + 1, j - i_ - 1);
            i_ = j + 1;
            return;
        }
        if (two('\\', '/')) { tok_.kind = Tok::OrOp; i_ += 2; return; }
        if (two('/', '\\')) { tok_.kind = Tok::AndOp; i_ += 2; return; }
        if (two('-', '>')) { tok_.kind = Tok::Arrow; i_ += 2; return; }
        if (two(':', '=')) { tok_.kind = Tok::Assign; i_ += 2; return; }
        switch (c) {
            case '{': tok_.kind = Tok::LBrace; break;
            case '}': tok_.kind = Tok::RBrace; break;
            case '(': tok_.kind = Tok::LParen; break;
            case ')': tok_.kind = Tok::RParen; break;
            case '[': tok_.kind = Tok::LBracket; break;
            case ']': tok_.kind = Tok::RBracket; break;
            case ',': tok_.kind = Tok::Comma; break;
            case ';': tok_.kind = Tok::Semi; break;
            case ':': tok_.kind = Tok::Colon; break;
            case '=': tok_.kind = Tok::Eq; break;
            case '+': tok_.kind = Tok::Plus; break;
            case '@': tok_.kind = Tok::At; break;
            case '^': tok_.kind = Tok::Caret; break;
            case '/': tok_.kind = Tok::Slash; break;
            case '#': tok_.kind = Tok::HashName; break;
            default:
                throw ParseError(std::string("unexpected character '") + c + "'", tok_.pos);
        }
        ++i_;
    }

    void skip_ws() {
        while (i_ < src_.size()) {
            char c = src_[i_];
            if (c == '\n') {
                ++line_;
                ++i_;
                line_start_ = i_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++i_;
            } else if (c == '/' && i_ + 1 < src_.size() && src_[i_ + 1] == '/') {
                while (i_ < src_.size() && src_[i_] != '\n') ++i_;
            } else {
                break;
            }
        }
    }

    const std::string& src_;
    size_t i_ = 0;
    size_t line_start_ = 0;
    int line_ = 1;
    Token tok_;
};

// ---- parser ------------------------------------------------------------------

class Parser {
  public:
    explicit Parser(const std::string& src) : lex_(src) {}

    World parse() {
        while (lex_.peek().kind != Tok::End) item();
        finish();
        return std::move(world_);
    }

  private:
    Lexer lex_;
    World world_;
    bool have_domains_ = false;
    NameId next_name_ = 1;
    std::map<std::string, NameId> name_ids_;

    [[noreturn]] void fail(const std::string& msg, Pos p) { throw ParseError(msg, p); }

    Token expect(Tok k, const std::string& what) {
        Token t = lex_.next();
        if (t.kind != k) fail("expected " + what, t.pos);
        return t;
    }
    bool accept(Tok k) {
        if (lex_.peek().kind == k) {
            lex_.next();
            return true;
        }
        return false;
    }
    bool peek_ident(const std::string& kw) {
        return lex_.peek().kind == Tok::Ident && lex_.peek().text == kw;
    }
    void expect_kw(const std::string& kw) {
        Token t = lex_.next();
        if (t.kind != Tok::Ident || t.text != kw) fail("expected '" + kw + "'", t.pos);
    }
    std::string ident() { return expect(Tok::Ident, "identifier").text; }

    void need_domains(Pos p) {
        if (!have_domains_) fail("the domains block must come first", p);
    }

    // ---- top-level items ----

    void item() {
        Token t = lex_.peek();
        if (t.kind != Tok::Ident) fail("expected a declaration", t.pos);
        const std::string& kw = t.text;
        if (kw == "domains") return domains_block();
        if (kw == "hsts") return hsts_block();
        if (kw == "url") return url_decl();
        if (kw == "attacker") return attacker_block();
        if (kw == "password") return password_decl();
        if (kw == "cookie") return cookie_decl();
        if (kw == "global") return global_decl();
        if (kw == "session") return session_decl();
        if (kw == "urltype") return urltype_decl();
        if (kw == "formtype") return formtype_decl();
        if (kw == "protected") return protected_block();
        if (kw == "server") return server_block();
        if (kw == "actions") return actions_block();
        fail("unknown declaration '" + kw + "'", t.pos);
    }

    void domains_block() {
        Pos p = lex_.peek().pos;
        expect_kw("domains");
        if (have_domains_) fail("duplicate domains block", p);
        expect(Tok::LBrace, "'{'");
        while (lex_.peek().kind != Tok::RBrace) {
            std::vector<std::string> group;
            if (accept(Tok::LBrace)) {
                group.push_back(ident());
                while (accept(Tok::Comma)) group.push_back(ident());
                expect(Tok::RBrace, "'}'");
            } else {
                group.push_back(ident());
            }
            world_.universe.add_related_group(group);
            accept(Tok::Semi);
        }
        expect(Tok::RBrace, "'}'");
        have_domains_ = true;
    }

    void hsts_block() {
        Pos p = lex_.peek().pos;
        expect_kw("hsts");
        need_domains(p);
        expect(Tok::LBrace, "'{'");
        while (lex_.peek().kind != Tok::RBrace) {
            Token t = expect(Tok::Ident, "domain");
            if (!world_.universe.has_domain(t.text)) fail("unknown domain: " + t.text, t.pos);
            world_.universe.enable_hsts(world_.universe.domain_id(t.text));
            accept(Tok::Comma);
        }
        expect(Tok::RBrace, "'}'");
    }

    void url_decl() {
        Pos p = lex_.peek().pos;
        expect_kw("url");
        need_domains(p);
        std::string alias = ident();
        expect(Tok::Eq, "'='");
        Token sch = expect(Tok::Ident, "http or https");
        Url u;
        if (sch.text == "http")
            u.scheme = Scheme::Http;
        else if (sch.text == "https")
            u.scheme = Scheme::Https;
        else
            fail("expected http or https", sch.pos);
        expect(Tok::LParen, "'('");
        Token d = expect(Tok::Ident, "domain");
        if (!world_.universe.has_domain(d.text)) fail("unknown domain: " + d.text, d.pos);
        u.domain = world_.universe.domain_id(d.text);
        expect(Tok::RParen, "')'");
        if (accept(Tok::Slash))
            u.path = ident();
        else
            u.path = alias;
        expect(Tok::Semi, "';'");
        if (world_.url_aliases.count(alias)) fail("duplicate url alias: " + alias, p);
        world_.url_aliases[alias] = u;
    }

    Url url_ref() {
        Token t = expect(Tok::Ident, "url name");
        auto it = world_.url_aliases.find(t.text);
        if (it == world_.url_aliases.end()) fail("unknown url: " + t.text, t.pos);
        return it->second;
    }

    // ---- labels and types ----

    enum class Polarity { Conf, Integ };

    SL simple_label(Polarity pol) {
        SL acc = sl_and(pol);
        while (lex_.peek().kind == Tok::OrOp) {
            lex_.next();
            acc = SimpleLabel::disj(acc, sl_and(pol));
        }
        return acc;
    }
    SL sl_and(Polarity pol) {
        SL acc = sl_atom(pol);
        while (lex_.peek().kind == Tok::AndOp) {
            lex_.next();
            acc = SimpleLabel::conj(acc, sl_atom(pol));
        }
        return acc;
    }
    SL sl_atom(Polarity pol) {
        Token t = lex_.peek();
        if (accept(Tok::LParen)) {
            SL inner = simple_label(pol);
            expect(Tok::RParen, "')'");
            return inner;
        }
        t = expect(Tok::Ident, "label atom");
        if (t.text == "HTTP" || t.text == "HTTPS") {
            expect(Tok::LParen, "'('");
            Token d = expect(Tok::Ident, "domain");
            if (!world_.universe.has_domain(d.text)) fail("unknown domain: " + d.text, d.pos);
            int id = world_.universe.domain_id(d.text);
            expect(Tok::RParen, "')'");
            return t.text == "HTTP" ? SimpleLabel::http(id) : SimpleLabel::https(id);
        }
        if (t.text == "BOT")
            return pol == Polarity::Conf ? conf_bottom(world_.universe) : integ_bottom(world_.universe);
        if (t.text == "TOP")
            return pol == Polarity::Conf ? conf_top(world_.universe) : integ_top(world_.universe);
        fail("expected HTTP(d), HTTPS(d), BOT or TOP", t.pos);
    }

    Label label_pair() {
        expect(Tok::LParen, "'('");
        SL c = simple_label(Polarity::Conf);
        expect(Tok::Semi, "';'");
        SL i = simple_label(Polarity::Integ);
        expect(Tok::RParen, "')'");
        return {c, i};
    }

    SecType sec_type() {
        if (peek_ident("cred")) {
            lex_.next();
            expect(Tok::LParen, "'('");
            Label l = label_pair();
            expect(Tok::RParen, "')'");
            return SecType::credential(l);
        }
        return SecType::plain(label_pair());
    }

    UrlType url_triple() {
        expect(Tok::LParen, "'('");
        UrlType t;
        t.conn = label_pair();
        expect(Tok::Comma, "','");
        expect(Tok::LBracket, "'['");
        if (lex_.peek().kind != Tok::RBracket) {
            t.params.push_back(sec_type());
            while (accept(Tok::Comma)) t.params.push_back(sec_type());
        }
        expect(Tok::RBracket, "']'");
        expect(Tok::Comma, "','");
        t.reply_integ = simple_label(Polarity::Integ);
        expect(Tok::RParen, "')'");
        return t;
    }

    Value name_literal() {
        Pos p = expect(Tok::HashName, "'#'").pos;
        Label ann = label_pair();
        expect(Tok::Colon, "':'");
        std::string id = ident();
        auto it = name_ids_.find(id);
        NameId nid;
        if (it != name_ids_.end()) {
            nid = it->second;
        } else {
            nid = next_name_++;
            name_ids_[id] = nid;
            world_.config_names[nid] = id;
        }
        (void)p;
        return Value::name_value(nid, SecType::credential(ann));
    }

    // ---- env declarations ----

    void attacker_block() {
        Pos p = lex_.peek().pos;
        expect_kw("attacker");
        need_domains(p);
        Token k = expect(Tok::Ident, "attacker kind");
        AttackerSpec spec;
        if (k.text == "web" || k.text == "related") {
            spec.kind = k.text == "web" ? AttackerSpec::Kind::Web : AttackerSpec::Kind::RelatedDomain;
            expect(Tok::LParen, "'('");
            Token d = expect(Tok::Ident, "domain");
            if (!world_.universe.has_domain(d.text)) fail("unknown domain: " + d.text, d.pos);
            spec.domain = world_.universe.domain_id(d.text);
            expect(Tok::RParen, "')'");
        } else if (k.text == "network") {
            spec.kind = AttackerSpec::Kind::Network;
        } else if (k.text == "custom") {
            spec.kind = AttackerSpec::Kind::Custom;
            expect(Tok::LParen, "'('");
            spec.custom = label_pair();
            expect(Tok::RParen, "')'");
        } else {
            fail("expected web(d), network, related(d) or custom((c;i))", k.pos);
        }
        world_.attacker = spec;
        expect(Tok::LBrace, "'{'");
        while (lex_.peek().kind != Tok::RBrace) {
            Token t = expect(Tok::Ident, "identities or knowledge");
            if (t.text == "identities") {
                expect(Tok::LBrace, "'{'");
                while (lex_.peek().kind != Tok::RBrace) {
                    world_.attacker_identities.push_back(ident());
                    accept(Tok::Comma);
                }
                expect(Tok::RBrace, "'}'");
            } else if (t.text == "knowledge") {
                expect(Tok::LBrace, "'{'");
                while (lex_.peek().kind != Tok::RBrace) {
                    Value n = name_literal();
                    world_.attacker_knowledge.emplace_back(n.name, *n.ann);
                    accept(Tok::Comma);
                }
                expect(Tok::RBrace, "'}'");
            } else {
                fail("expected identities or knowledge", t.pos);
            }
        }
        expect(Tok::RBrace, "'}'");
    }

    void password_decl() {
        Pos p = lex_.peek().pos;
        expect_kw("password");
        need_domains(p);
        std::string who = ident();
        expect(Tok::At, "'@'");
        Url u = url_ref();
        expect(Tok::Eq, "'='");
        Value n = name_literal();
        expect(Tok::Semi, "';'");
        world_.passwords[{who, u}] = n;
    }

    void cookie_decl() {
        Pos p = lex_.peek().pos;
        expect_kw("cookie");
        need_domains(p);
        std::string ref = ident();
        expect(Tok::At, "'@'");
        Token d = expect(Tok::Ident, "domain");
        if (!world_.universe.has_domain(d.text)) fail("unknown domain: " + d.text, d.pos);
        CookieAttrs attrs;
        attrs.domain = world_.universe.domain_id(d.text);
        expect(Tok::Colon, "':'");
        SecType ty = sec_type();
        if (peek_ident("attrs")) {
            lex_.next();
            expect(Tok::LBrace, "'{'");
            while (lex_.peek().kind != Tok::RBrace) {
                Token a = expect(Tok::Ident, "cookie attribute");
                if (a.text == "secure") {
                    attrs.secure = true;
                } else if (a.text == "host_prefix") {
                    attrs.prefix = CookiePrefix::Host;
                    attrs.secure = true;
                } else if (a.text == "secure_prefix") {
                    attrs.prefix = CookiePrefix::Secure;
                    attrs.secure = true;
                } else if (a.text == "domain") {
                    expect(Tok::LParen, "'('");
                    Token dd = expect(Tok::Ident, "domain");
                    if (!world_.universe.has_domain(dd.text))
                        fail("unknown domain: " + dd.text, dd.pos);
                    attrs.domain_attribute = world_.universe.domain_id(dd.text);
                    expect(Tok::RParen, "')'");
                } else {
                    fail("unknown cookie attribute '" + a.text + "'", a.pos);
                }
                accept(Tok::Comma);
            }
            expect(Tok::RBrace, "'}'");
        }
        expect(Tok::Semi, "';'");
        try {
            validate_cookie_attrs(attrs);
        } catch (const ConfigError& e) {
            fail(e.what(), p);
        }
        world_.cookie_attrs[ref] = attrs;
        world_.env.globals[ref] = ty;
    }

    void global_decl() {
        expect_kw("global");
        std::string r = ident();
        expect(Tok::Colon, "':'");
        world_.env.globals[r] = sec_type();
        expect(Tok::Semi, "';'");
    }

    void session_decl() {
        expect_kw("session");
        std::string r = ident();
        expect(Tok::Colon, "':'");
        world_.env.sessions[r] = sec_type();
        expect(Tok::Semi, "';'");
    }

    void urltype_decl() {
        expect_kw("urltype");
        Url u = url_ref();
        expect(Tok::Colon, "':'");
        world_.env.urls[u] = url_triple();
        expect(Tok::Semi, "';'");
    }

    void formtype_decl() {
        expect_kw("formtype");
        Pos p = lex_.peek().pos;
        std::string tag = ident();
        expect(Tok::Colon, "':'");
        if (lex_.peek().kind == Tok::Ident) {
            Url u = url_ref();
            auto it = world_.env.urls.find(u);
            if (it == world_.env.urls.end()) fail("formtype refers to untyped url", p);
            world_.env.forms[tag] = it->second;
        } else {
            world_.env.forms[tag] = url_triple();
        }
        expect(Tok::Semi, "';'");
    }

    void protected_block() {
        expect_kw("protected");
        expect(Tok::LBrace, "'{'");
        while (lex_.peek().kind != Tok::RBrace) {
            world_.protected_urls.push_back(url_ref());
            accept(Tok::Comma);
        }
        expect(Tok::RBrace, "'}'");
    }

    // ---- server code ----

    void server_block() {
        expect_kw("server");
        expect(Tok::LBrace, "'{'");
        while (!accept(Tok::RBrace)) endpoint();
    }

    void endpoint() {
        Pos p = lex_.peek().pos;
        expect_kw("listen");
        expect(Tok::LParen, "'('");
        Endpoint ep;
        ep.pos = p;
        ep.url = url_ref();
        expect(Tok::RParen, "')'");
        expect(Tok::LBracket, "'['");
        while (lex_.peek().kind != Tok::RBracket) {
            ep.cookies.push_back(ident());
            accept(Tok::Comma);
        }
        expect(Tok::RBracket, "']'");
        expect(Tok::LParen, "'('");
        while (lex_.peek().kind != Tok::RParen) {
            ep.params.push_back(ident());
            accept(Tok::Comma);
        }
        expect(Tok::RParen, "')'");
        expect(Tok::LBrace, "'{'");
        ep.body = command_seq();
        expect(Tok::RBrace, "'}'");
        world_.endpoints.push_back(std::move(ep));
    }

    CommandPtr command_seq() {
        CommandPtr acc = command();
        while (accept(Tok::Semi)) {
            if (lex_.peek().kind == Tok::RBrace || lex_.peek().kind == Tok::End) break;
            CommandPtr nxt = command();
            acc = cmd_seq(acc, nxt, acc->pos);
        }
        return acc;
    }

    CommandPtr command() {
        Token t = lex_.peek();
        if (t.kind == Tok::At) return assignment();
        if (t.kind != Tok::Ident) fail("expected a command", t.pos);
        const std::string& kw = t.text;
        Pos p = t.pos;
        if (kw == "skip") { lex_.next(); return cmd_skip(p); }
        if (kw == "halt") { lex_.next(); return cmd_halt(p); }
        if (kw == "if") {
            lex_.next();
            expect(Tok::LParen, "'('");
            ServerExprPtr guard = expr();
            expect(Tok::RParen, "')'");
            expect(Tok::LBrace, "'{'");
            CommandPtr thn = command_seq();
            expect(Tok::RBrace, "'}'");
            CommandPtr els = cmd_skip(p);
            if (peek_ident("else")) {
                lex_.next();
                expect(Tok::LBrace, "'{'");
                els = command_seq();
                expect(Tok::RBrace, "'}'");
            }
            return cmd_if(guard, thn, els, p);
        }
        if (kw == "login") {
            lex_.next();
            expect(Tok::LParen, "'('");
            ServerExprPtr u = expr();
            expect(Tok::Comma, "','");
            ServerExprPtr pw = expr();
            expect(Tok::Comma, "','");
            ServerExprPtr sid = expr();
            expect(Tok::RParen, "')'");
            return cmd_login(u, pw, sid, p);
        }
        if (kw == "start") {
            lex_.next();
            expect(Tok::LParen, "'('");
            ServerExprPtr e = expr();
            expect(Tok::RParen, "')'");
            return cmd_start(e, p);
        }
        if (kw == "auth") {
            lex_.next();
            expect(Tok::LParen, "'('");
            std::vector<ServerExprPtr> args;
            while (lex_.peek().kind != Tok::RParen) {
                args.push_back(expr());
                if (!accept(Tok::Comma)) break;
            }
            expect(Tok::RParen, "')'");
            expect(Tok::At, "'@'");
            Label l = label_pair();
            return cmd_auth(std::move(args), l, p);
        }
        if (kw == "tokenchk") {
            lex_.next();
            expect(Tok::LParen, "'('");
            ServerExprPtr x = expr();
            expect(Tok::Comma, "','");
            ServerExprPtr r = expr();
            expect(Tok::RParen, "')'");
            expect(Tok::LBrace, "'{'");
            CommandPtr body = command_seq();
            expect(Tok::RBrace, "'}'");
            return cmd_tokenchk(x, r, body, p);
        }
        if (kw == "originchk") {
            lex_.next();
            expect(Tok::LBrace, "'{'");
            std::vector<SL> origins;
            while (lex_.peek().kind != Tok::RBrace) {
                origins.push_back(simple_label(Polarity::Integ));
                accept(Tok::Comma);
            }
            expect(Tok::RBrace, "'}'");
            expect(Tok::LBrace, "'{'");
            CommandPtr body = command_seq();
            expect(Tok::RBrace, "'}'");
            return cmd_originchk(std::move(origins), body, p);
        }
        if (kw == "reply") {
            lex_.next();
            expect(Tok::LParen, "'('");
            Page page = parse_page();
            expect(Tok::RParen, "')'");
            expect(Tok::LBrace, "'{'");
            ScriptPtr s = lex_.peek().kind == Tok::RBrace ? script_skip(p) : script_seq_tail();
            expect(Tok::RBrace, "'}'");
            auto [ck, consts] = cookie_map();
            std::vector<Binder> binders = with_clause();
            return cmd_reply(std::move(page), s, std::move(ck), std::move(consts),
                             std::move(binders), p);
        }
        if (kw == "redirect") {
            lex_.next();
            expect(Tok::LParen, "'('");
            Url target = url_ref();
            std::vector<FormParam> params;
            if (accept(Tok::Comma)) {
                expect(Tok::LBracket, "'['");
                while (lex_.peek().kind != Tok::RBracket) {
                    params.push_back(form_param());
                    accept(Tok::Comma);
                }
                expect(Tok::RBracket, "']'");
            }
            expect(Tok::RParen, "')'");
            auto [ck, consts] = cookie_map();
            std::vector<Binder> binders = with_clause();
            return cmd_redirect(target, std::move(params), std::move(ck), std::move(consts),
                                std::move(binders), p);
        }
        fail("unknown command '" + kw + "'", t.pos);
    }

    CommandPtr assignment() {
        Pos p = lex_.peek().pos;
        expect(Tok::At, "'@'");
        Token which = expect(Tok::Ident, "glob or sess");
        std::string r = ident();
        expect(Tok::Assign, "':='");
        ServerExprPtr e = expr();
        if (which.text == "glob") return cmd_set_global(r, e, p);
        if (which.text == "sess") return cmd_set_session(r, e, p);
        fail("expected @glob or @sess", which.pos);
    }

    Page parse_page() {
        if (peek_ident("error")) {
            lex_.next();
            return Page::error_page();
        }
        expect(Tok::LBrace, "'{'");
        Page page = Page::empty();
        while (lex_.peek().kind != Tok::RBrace) {
            Token tag = lex_.next();
            std::string tagname;
            if (tag.kind == Tok::Ident)
                tagname = tag.text;
            else if (tag.kind == Tok::Str)
                tagname = tag.text;
            else
                fail("expected a form tag", tag.pos);
            expect(Tok::Arrow, "'->'");
            expect_kw("form");
            expect(Tok::LParen, "'('");
            Form f;
            f.target = url_ref();
            expect(Tok::Comma, "','");
            expect(Tok::LBracket, "'['");
            while (lex_.peek().kind != Tok::RBracket) {
                f.params.push_back(form_param());
                accept(Tok::Comma);
            }
            expect(Tok::RBracket, "']'");
            expect(Tok::RParen, "')'");
            if (page.forms.count(tagname)) fail("duplicate form tag " + tagname, tag.pos);
            page.forms[tagname] = std::move(f);
            accept(Tok::Comma);
        }
        expect(Tok::RBrace, "'}'");
        return page;
    }

    // A form/redirect parameter: a literal value or a variable.
    FormParam form_param() {
        Token t = lex_.peek();
        if (t.kind == Tok::Ident && !is_value_keyword(t.text)) {
            lex_.next();
            return {true, t.text, {}};
        }
        return {false, "", value()};
    }

    static bool is_value_keyword(const std::string& s) {
        return s == "true" || s == "false" || s == "undef" || s == "id";
    }

    Value value() {
        Token t = lex_.next();
        switch (t.kind) {
            case Tok::Int: return Value::integer(t.num);
            case Tok::Str: return Value::string(t.text);
            case Tok::HashName: {
                // put the '#' back conceptually: name_literal consumed it
                Label ann = label_pair();
                expect(Tok::Colon, "':'");
                std::string id = ident();
                auto it = name_ids_.find(id);
                if (it == name_ids_.end()) fail("unknown name: " + id, t.pos);
                return Value::name_value(it->second, SecType::credential(ann));
            }
            case Tok::Ident:
                if (t.text == "true") return Value::boolean(true);
                if (t.text == "false") return Value::boolean(false);
                if (t.text == "undef") return Value::undef();
                if (t.text == "id") {
                    expect(Tok::LParen, "'('");
                    std::string who = ident();
                    expect(Tok::RParen, "')'");
                    return Value::identity(who);
                }
                fail("expected a value", t.pos);
            default:
                fail("expected a value", t.pos);
        }
    }

    std::pair<std::map<std::string, std::string>, std::map<std::string, Value>> cookie_map() {
        expect(Tok::LBrace, "'{'");
        std::map<std::string, std::string> vars;
        std::map<std::string, Value> consts;
        while (lex_.peek().kind != Tok::RBrace) {
            std::string ref = ident();
            expect(Tok::Arrow, "'->'");
            Token t = lex_.peek();
            if (t.kind == Tok::Ident && !is_value_keyword(t.text)) {
                lex_.next();
                vars[ref] = t.text;
            } else {
                consts[ref] = value();
            }
            accept(Tok::Comma);
        }
        expect(Tok::RBrace, "'}'");
        return {std::move(vars), std::move(consts)};
    }

    std::vector<Binder> with_clause() {
        std::vector<Binder> out;
        if (!peek_ident("with")) return out;
        lex_.next();
        out.push_back(binder());
        while (accept(Tok::Comma)) out.push_back(binder());
        return out;
    }
    Binder binder() {
        std::string v = ident();
        expect(Tok::Eq, "'='");
        return {v, expr()};
    }

    // ---- server expressions (or > and > + > =) ----

    ServerExprPtr expr() { return expr_or(); }
    ServerExprPtr expr_or() {
        ServerExprPtr acc = expr_and();
        while (peek_ident("or")) {
            Pos p = lex_.next().pos;
            acc = se_binop(ServerExpr::Op::Or, acc, expr_and(), p);
        }
        return acc;
    }
    ServerExprPtr expr_and() {
        ServerExprPtr acc = expr_add();
        while (peek_ident("and")) {
            Pos p = lex_.next().pos;
            acc = se_binop(ServerExpr::Op::And, acc, expr_add(), p);
        }
        return acc;
    }
    ServerExprPtr expr_add() {
        ServerExprPtr acc = expr_eq();
        while (lex_.peek().kind == Tok::Plus) {
            Pos p = lex_.next().pos;
            acc = se_binop(ServerExpr::Op::Add, acc, expr_eq(), p);
        }
        return acc;
    }
    ServerExprPtr expr_eq() {
        ServerExprPtr acc = expr_prim();
        while (lex_.peek().kind == Tok::Eq) {
            Pos p = lex_.next().pos;
            acc = se_binop(ServerExpr::Op::Eq, acc, expr_prim(), p);
        }
        return acc;
    }
    ServerExprPtr expr_prim() {
        Token t = lex_.peek();
        Pos p = t.pos;
        if (t.kind == Tok::At) {
            lex_.next();
            Token which = expect(Tok::Ident, "glob or sess");
            std::string r = ident();
            if (which.text == "glob") return se_global(r, p);
            if (which.text == "sess") return se_session(r, p);
            fail("expected @glob or @sess", which.pos);
        }
        if (t.kind == Tok::LParen) {
            lex_.next();
            ServerExprPtr inner = expr();
            expect(Tok::RParen, "')'");
            return inner;
        }
        if (t.kind == Tok::Ident && t.text == "fresh") {
            lex_.next();
            expect(Tok::LParen, "'('");
            expect(Tok::RParen, "')'");
            expect(Tok::Caret, "'^'");
            SecType ann = sec_type();
            if (!ann.cred) fail("fresh() annotation must be a credential type", p);
            return se_fresh(ann, p);
        }
        if (t.kind == Tok::Ident && !is_value_keyword(t.text)) {
            lex_.next();
            return se_var(t.text, p);
        }
        return se_val(value(), p);
    }

    // ---- browser scripts ----

    ScriptPtr script_seq_tail() {
        ScriptPtr acc = script_cmd();
        while (accept(Tok::Semi)) {
            if (lex_.peek().kind == Tok::RBrace) break;
            acc = script_seq(acc, script_cmd(), acc->pos);
        }
        return acc;
    }

    ScriptPtr script_cmd() {
        Token t = lex_.peek();
        Pos p = t.pos;
        if (t.kind == Tok::At) {
            lex_.next();
            Token which = expect(Tok::Ident, "ck");
            if (which.text != "ck") fail("scripts may only assign @ck references", which.pos);
            std::string r = ident();
            expect(Tok::Assign, "':='");
            return script_assign(r, bexpr(), p);
        }
        if (t.kind != Tok::Ident) fail("expected a script command", t.pos);
        if (t.text == "skip") {
            lex_.next();
            return script_skip(p);
        }
        if (t.text == "include") {
            lex_.next();
            expect(Tok::LParen, "'('");
            Url u = url_ref();
            std::vector<BrowserExprPtr> args;
            if (accept(Tok::Comma)) {
                expect(Tok::LBracket, "'['");
                while (lex_.peek().kind != Tok::RBracket) {
                    args.push_back(bexpr());
                    accept(Tok::Comma);
                }
                expect(Tok::RBracket, "']'");
            }
            expect(Tok::RParen, "')'");
            return script_include(u, std::move(args), p);
        }
        if (t.text == "setdom") {
            lex_.next();
            expect(Tok::LParen, "'('");
            BrowserExprPtr tag = bexpr();
            expect(Tok::Comma, "','");
            Url u = url_ref();
            std::vector<BrowserExprPtr> args;
            if (accept(Tok::Comma)) {
                expect(Tok::LBracket, "'['");
                while (lex_.peek().kind != Tok::RBracket) {
                    args.push_back(bexpr());
                    accept(Tok::Comma);
                }
                expect(Tok::RBracket, "']'");
            }
            expect(Tok::RParen, "')'");
            return script_setdom(tag, u, std::move(args), p);
        }
        fail("unknown script command '" + t.text + "'", t.pos);
    }

    BrowserExprPtr bexpr() { return bexpr_or(); }
    BrowserExprPtr bexpr_or() {
        BrowserExprPtr acc = bexpr_and();
        while (peek_ident("or")) {
            Pos p = lex_.next().pos;
            acc = be_binop(ServerExpr::Op::Or, acc, bexpr_and(), p);
        }
        return acc;
    }
    BrowserExprPtr bexpr_and() {
        BrowserExprPtr acc = bexpr_add();
        while (peek_ident("and")) {
            Pos p = lex_.next().pos;
            acc = be_binop(ServerExpr::Op::And, acc, bexpr_add(), p);
        }
        return acc;
    }
    BrowserExprPtr bexpr_add() {
        BrowserExprPtr acc = bexpr_eq();
        while (lex_.peek().kind == Tok::Plus) {
            Pos p = lex_.next().pos;
            acc = be_binop(ServerExpr::Op::Add, acc, bexpr_eq(), p);
        }
        return acc;
    }
    BrowserExprPtr bexpr_eq() {
        BrowserExprPtr acc = bexpr_prim();
        while (lex_.peek().kind == Tok::Eq) {
            Pos p = lex_.next().pos;
            acc = be_binop(ServerExpr::Op::Eq, acc, bexpr_prim(), p);
        }
        return acc;
    }
    BrowserExprPtr bexpr_prim() {
        Token t = lex_.peek();
        Pos p = t.pos;
        if (t.kind == Tok::At) {
            lex_.next();
            Token which = expect(Tok::Ident, "ck");
            if (which.text != "ck") fail("expected @ck", which.pos);
            return be_cookie(ident(), p);
        }
        if (t.kind == Tok::LParen) {
            lex_.next();
            BrowserExprPtr inner = bexpr();
            expect(Tok::RParen, "')'");
            return inner;
        }
        if (t.kind == Tok::Ident && t.text == "dom") {
            lex_.next();
            expect(Tok::LParen, "'('");
            BrowserExprPtr tag = bexpr();
            expect(Tok::Comma, "','");
            BrowserExprPtr idx = bexpr();
            expect(Tok::RParen, "')'");
            return be_dom(tag, idx, p);
        }
        if (t.kind == Tok::Ident && !is_value_keyword(t.text)) {
            lex_.next();
            return be_var(t.text, p);
        }
        return be_val(value(), p);
    }

    // ---- actions ----

    void actions_block() {
        expect_kw("actions");
        expect(Tok::LBrace, "'{'");
        while (lex_.peek().kind != Tok::RBrace) {
            world_.actions.push_back(action());
            accept(Tok::Semi);
        }
        expect(Tok::RBrace, "'}'");
    }

    UserAction action() {
        Token t = expect(Tok::Ident, "action");
        UserAction a;
        if (t.text == "halt") {
            a.kind = UserAction::Kind::Halt;
            return a;
        }
        if (t.text == "load") {
            a.kind = UserAction::Kind::Load;
            expect(Tok::LParen, "'('");
            a.tab = static_cast<int>(expect(Tok::Int, "tab id").num);
            expect(Tok::Comma, "','");
            a.url = url_ref();
            expect(Tok::RParen, "')'");
            a.inputs = inputs();
            return a;
        }
        if (t.text == "submit") {
            a.kind = UserAction::Kind::Submit;
            expect(Tok::LParen, "'('");
            a.tab = static_cast<int>(expect(Tok::Int, "tab id").num);
            expect(Tok::Comma, "','");
            a.url = url_ref();
            expect(Tok::Comma, "','");
            Token tag = lex_.next();
            if (tag.kind != Tok::Ident && tag.kind != Tok::Str) fail("expected form tag", tag.pos);
            a.form_tag = tag.text;
            expect(Tok::RParen, "')'");
            a.inputs = inputs();
            return a;
        }
        fail("expected halt, load or submit", t.pos);
    }

    std::map<int, Value> inputs() {
        expect(Tok::LBrace, "'{'");
        std::map<int, Value> out;
        while (lex_.peek().kind != Tok::RBrace) {
            int k = static_cast<int>(expect(Tok::Int, "input position").num);
            expect(Tok::Arrow, "'->'");
            Value v = action_value();
            expect(Tok::Caret, "'^'");
            SecType ann = sec_type();
            v.ann = ann;
            out[k] = v;
            accept(Tok::Comma);
        }
        expect(Tok::RBrace, "'}'");
        return out;
    }

    // In action inputs a bare identifier denotes an identity, and
    // pwd(who, url) denotes the declared password name.
    Value action_value() {
        Token t = lex_.peek();
        if (t.kind == Tok::Ident && t.text == "pwd") {
            lex_.next();
            expect(Tok::LParen, "'('");
            std::string who = ident();
            expect(Tok::Comma, "','");
            Url u = url_ref();
            expect(Tok::RParen, "')'");
            auto it = world_.passwords.find({who, u});
            if (it == world_.passwords.end()) fail("no password declared for " + who, t.pos);
            return it->second;
        }
        if (t.kind == Tok::Ident && !is_value_keyword(t.text)) {
            lex_.next();
            return Value::identity(t.text);
        }
        return value();
    }

    // ---- load-time validation ----

    void finish() {
        if (!have_domains_) fail("missing domains block", {});
        world_.first_runtime_name = next_name_;

        std::set<Url> seen;
        for (const auto& ep : world_.endpoints) {
            if (!seen.insert(ep.url).second)
                fail("duplicate endpoint for url " + world_.url_name(ep.url), ep.pos);
            auto it = world_.env.urls.find(ep.url);
            if (it == world_.env.urls.end())
                fail("endpoint " + world_.url_name(ep.url) + " has no urltype entry", ep.pos);
            if (it->second.params.size() != ep.params.size())
                fail("urltype arity mismatch for " + world_.url_name(ep.url), ep.pos);
            for (const auto& ck : ep.cookies)
                if (!world_.cookie_attrs.count(ck))
                    fail("endpoint cookie '" + ck + "' has no cookie declaration", ep.pos);
            check_body(ep);
        }
        for (const auto& [key, name] : world_.passwords) {
            if (!world_.find_endpoint(key.second))
                fail("password declared for non-endpoint url", {});
        }
        // Attacker knowledge must be coverable by the attacker label.
        Label la = world_.attacker_lab();
        for (const auto& [nid, ann] : world_.attacker_knowledge) {
            if (!subtype(ann, SecType::plain(la), la))
                fail("attacker knowledge name " + world_.config_names[nid] +
                         " exceeds the attacker label",
                     {});
        }
        // Honest-user passwords must be secrets the attacker cannot read.
        for (const auto& [key, name] : world_.passwords) {
            if (key.first != "usr") continue;
            if (is_conf_low(name.ann->label.conf, la))
                fail("usr password for " + world_.url_name(key.second) +
                         " must have high confidentiality",
                     {});
        }
    }

    void check_body(const Endpoint& ep) {
        std::set<std::string> params(ep.params.begin(), ep.params.end());
        check_cmd(ep.body, params);
    }

    void check_cookie_keys(const Command& c, Pos p) {
        for (const auto& [ref, v] : c.cookies)
            if (!world_.cookie_attrs.count(ref)) fail("reply sets undeclared cookie " + ref, p);
        for (const auto& [ref, v] : c.cookie_consts)
            if (!world_.cookie_attrs.count(ref)) fail("reply sets undeclared cookie " + ref, p);
    }

    void check_expr_vars(const ServerExprPtr& e, const std::set<std::string>& scope) {
        if (!e) return;
        if (e->kind == ServerExpr::Kind::Var && !scope.count(e->name))
            fail("unbound variable " + e->name, e->pos);
        check_expr_vars(e->lhs, scope);
        check_expr_vars(e->rhs, scope);
    }

    void check_cmd(const CommandPtr& c, const std::set<std::string>& scope) {
        if (!c) return;
        switch (c->kind) {
            case Command::Kind::Seq:
            case Command::Kind::If:
                check_expr_vars(c->expr, scope);
                check_cmd(c->first, scope);
                check_cmd(c->second, scope);
                return;
            case Command::Kind::SetGlobal:
            case Command::Kind::SetSession:
            case Command::Kind::Start:
                check_expr_vars(c->expr, scope);
                return;
            case Command::Kind::Login:
                check_expr_vars(c->expr, scope);
                check_expr_vars(c->expr2, scope);
                check_expr_vars(c->expr3, scope);
                return;
            case Command::Kind::Auth:
                for (const auto& a : c->auth_args) check_expr_vars(a, scope);
                return;
            case Command::Kind::TokenChk:
                check_expr_vars(c->expr, scope);
                check_expr_vars(c->expr2, scope);
                check_cmd(c->body, scope);
                return;
            case Command::Kind::OriginChk:
                check_cmd(c->body, scope);
                return;
            case Command::Kind::Reply:
            case Command::Kind::Redirect: {
                check_cookie_keys(*c, c->pos);
                std::set<std::string> binder_names;
                for (const auto& b : c->binders) {
                    check_expr_vars(b.expr, scope);
                    if (!binder_names.insert(b.var).second)
                        fail("duplicate binder variable " + b.var, c->pos);
                }
                std::set<std::string> inner = scope;
                inner.insert(binder_names.begin(), binder_names.end());
                for (const auto& [tag, form] : c->page.forms) {
                    if (!world_.env.forms.count(tag))
                        fail("form tag '" + tag + "' has no formtype entry", c->pos);
                    for (const auto& fp : form.params)
                        if (fp.is_var && !inner.count(fp.var))
                            fail("unbound variable " + fp.var + " in form", c->pos);
                }
                for (const auto& fp : c->redirect_params)
                    if (fp.is_var && !inner.count(fp.var))
                        fail("unbound variable " + fp.var + " in redirect", c->pos);
                for (const auto& [ref, var] : c->cookies)
                    if (!inner.count(var)) fail("unbound variable " + var + " in cookies", c->pos);
                check_script_vars(c->script, inner);
                return;
            }
            default:
                return;
        }
    }

    void check_script_vars(const ScriptPtr& s, const std::set<std::string>& scope) {
        if (!s) return;
        switch (s->kind) {
            case Script::Kind::Seq:
                check_script_vars(s->first, scope);
                check_script_vars(s->second, scope);
                return;
            case Script::Kind::Assign:
                check_bexpr_vars(s->expr, scope);
                return;
            case Script::Kind::Include:
            case Script::Kind::SetDom:
                check_bexpr_vars(s->expr, scope);
                for (const auto& a : s->args) check_bexpr_vars(a, scope);
                return;
            default:
                return;
        }
    }
    void check_bexpr_vars(const BrowserExprPtr& e, const std::set<std::string>& scope) {
        if (!e) return;
        if (e->kind == BrowserExpr::Kind::Var && !scope.count(e->name))
            fail("unbound variable " + e->name + " in script", e->pos);
        check_bexpr_vars(e->lhs, scope);
        check_bexpr_vars(e->rhs, scope);
    }
};

}  // namespace

World parse_world(const std::string& text) { return Parser(text).parse(); }

World parse_world_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path, {});
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_world(ss.str());
}

// ---- printing ------------------------------------------------------------------

namespace {

std::string print_value(const Value& v, const World& w) {
    switch (v.kind) {
        case Value::Kind::Undef: return "undef";
        case Value::Kind::Bool: return v.b ? "true" : "false";
        case Value::Kind::Int: return std::to_string(v.i);
        case Value::Kind::Str: return "\"" + v.s + "\"";
        case Value::Kind::Identity: return "id(" + v.s + ")";
        case Value::Kind::UrlV: return w.url_name(v.url);
        case Value::Kind::Name: {
            auto it = w.config_names.find(v.name);
            std::string id = it != w.config_names.end() ? it->second : std::to_string(v.name);
            return "#" + to_string(v.ann->label, w.universe) + ":" + id;
        }
    }
    return "?";
}

std::string op_str(ServerExpr::Op op) {
    switch (op) {
        case ServerExpr::Op::Eq: return "=";
        case ServerExpr::Op::And: return "and";
        case ServerExpr::Op::Or: return "or";
        case ServerExpr::Op::Add: return "+";
    }
    return "?";
}

std::string print_bexpr(const BrowserExprPtr& e, const World& w) {
    switch (e->kind) {
        case BrowserExpr::Kind::Var: return e->name;
        case BrowserExpr::Kind::CookieRef: return "@ck " + e->name;
        case BrowserExpr::Kind::Val: return print_value(e->value, w);
        case BrowserExpr::Kind::Dom:
            return "dom(" + print_bexpr(e->lhs, w) + ", " + print_bexpr(e->rhs, w) + ")";
        case BrowserExpr::Kind::BinOp:
            return "(" + print_bexpr(e->lhs, w) + " " + op_str(e->op) + " " +
                   print_bexpr(e->rhs, w) + ")";
    }
    return "?";
}

std::string print_form_param(const FormParam& fp, const World& w) {
    return fp.is_var ? fp.var : print_value(fp.value, w);
}

std::string print_cookies(const Command& c, const World& w) {
    std::string out = "{ ";
    bool first = true;
    for (const auto& [ref, var] : c.cookies) {
        if (!first) out += ", ";
        out += ref + " -> " + var;
        first = false;
    }
    for (const auto& [ref, v] : c.cookie_consts) {
        if (!first) out += ", ";
        out += ref + " -> " + print_value(v, w);
        first = false;
    }
    return out + (first ? "}" : " }");
}

std::string print_binders(const std::vector<Binder>& bs, const World& w) {
    if (bs.empty()) return "";
    std::string out = " with ";
    for (size_t i = 0; i < bs.size(); ++i) {
        if (i) out += ", ";
        out += bs[i].var + " = " + print_server_expr(bs[i].expr, w);
    }
    return out;
}

std::string ind(int n) { return std::string(static_cast<size_t>(n) * 2, ' '); }

}  // namespace

std::string print_server_expr(const ServerExprPtr& e, const World& w) {
    switch (e->kind) {
        case ServerExpr::Kind::Var: return e->name;
        case ServerExpr::Kind::GlobalRef: return "@glob " + e->name;
        case ServerExpr::Kind::SessionRef: return "@sess " + e->name;
        case ServerExpr::Kind::Val: return print_value(e->value, w);
        case ServerExpr::Kind::Fresh:
            return "fresh()^" + to_string(e->fresh_ann, w.universe);
        case ServerExpr::Kind::BinOp:
            return "(" + print_server_expr(e->lhs, w) + " " + op_str(e->op) + " " +
                   print_server_expr(e->rhs, w) + ")";
    }
    return "?";
}

std::string print_script(const ScriptPtr& s, const World& w) {
    switch (s->kind) {
        case Script::Kind::Skip: return "skip";
        case Script::Kind::Seq:
            return print_script(s->first, w) + "; " + print_script(s->second, w);
        case Script::Kind::Assign: return "@ck " + s->ref + " := " + print_bexpr(s->expr, w);
        case Script::Kind::Include: {
            std::string out = "include(" + w.url_name(s->url) + ", [";
            for (size_t i = 0; i < s->args.size(); ++i) {
                if (i) out += ", ";
                out += print_bexpr(s->args[i], w);
            }
            return out + "])";
        }
        case Script::Kind::SetDom: {
            std::string out = "setdom(" + print_bexpr(s->expr, w) + ", " + w.url_name(s->url) + ", [";
            for (size_t i = 0; i < s->args.size(); ++i) {
                if (i) out += ", ";
                out += print_bexpr(s->args[i], w);
            }
            return out + "])";
        }
    }
    return "?";
}

std::string print_command(const CommandPtr& c, const World& w, int indent) {
    std::string pre = ind(indent);
    switch (c->kind) {
        case Command::Kind::Skip: return pre + "skip";
        case Command::Kind::Halt: return pre + "halt";
        case Command::Kind::Seq:
            return print_command(c->first, w, indent) + ";\n" + print_command(c->second, w, indent);
        case Command::Kind::SetGlobal:
            return pre + "@glob " + c->ref + " := " + print_server_expr(c->expr, w);
        case Command::Kind::SetSession:
            return pre + "@sess " + c->ref + " := " + print_server_expr(c->expr, w);
        case Command::Kind::If: {
            std::string out = pre + "if (" + print_server_expr(c->expr, w) + ") {\n" +
                              print_command(c->first, w, indent + 1) + "\n" + pre + "}";
            if (c->second && c->second->kind != Command::Kind::Skip)
                out += " else {\n" + print_command(c->second, w, indent + 1) + "\n" + pre + "}";
            return out;
        }
        case Command::Kind::Login:
            return pre + "login(" + print_server_expr(c->expr, w) + ", " +
                   print_server_expr(c->expr2, w) + ", " + print_server_expr(c->expr3, w) + ")";
        case Command::Kind::Start:
            return pre + "start(" + print_server_expr(c->expr, w) + ")";
        case Command::Kind::Auth: {
            std::string out = pre + "auth(";
            for (size_t i = 0; i < c->auth_args.size(); ++i) {
                if (i) out += ", ";
                out += print_server_expr(c->auth_args[i], w);
            }
            return out + ") @ " + to_string(c->auth_label, w.universe);
        }
        case Command::Kind::TokenChk:
            return pre + "tokenchk(" + print_server_expr(c->expr, w) + ", " +
                   print_server_expr(c->expr2, w) + ") {\n" + print_command(c->body, w, indent + 1) +
                   "\n" + pre + "}";
        case Command::Kind::OriginChk: {
            std::string out = pre + "originchk { ";
            for (size_t i = 0; i < c->origins.size(); ++i) {
                if (i) out += ", ";
                out += to_string(c->origins[i], w.universe);
            }
            return out + " } {\n" + print_command(c->body, w, indent + 1) + "\n" + pre + "}";
        }
        case Command::Kind::Reply: {
            std::string out = pre + "reply(";
            if (c->page.error) {
                out += "error";
            } else {
                out += "{ ";
                bool first = true;
                for (const auto& [tag, form] : c->page.forms) {
                    if (!first) out += ", ";
                    out += tag + " -> form(" + w.url_name(form.target) + ", [";
                    for (size_t i = 0; i < form.params.size(); ++i) {
                        if (i) out += ", ";
                        out += print_form_param(form.params[i], w);
                    }
                    out += "])";
                    first = false;
                }
                out += first ? "}" : " }";
            }
            out += "){ " + print_script(c->script, w) + " }" + print_cookies(*c, w);
            return out + print_binders(c->binders, w);
        }
        case Command::Kind::Redirect: {
            std::string out = pre + "redirect(" + w.url_name(c->redirect_target);
            if (!c->redirect_params.empty()) {
                out += ", [";
                for (size_t i = 0; i < c->redirect_params.size(); ++i) {
                    if (i) out += ", ";
                    out += print_form_param(c->redirect_params[i], w);
                }
                out += "]";
            }
            out += ")" + print_cookies(*c, w);
            return out + print_binders(c->binders, w);
        }
    }
    return pre + "?";
}

std::string print_world(const World& w) {
    std::ostringstream out;
    const Universe& u = w.universe;
    out << "domains { ";
    std::set<int> done;
    bool firstg = true;
    for (int d : u.all_domains()) {
        if (done.count(d)) continue;
        auto cls = u.related_class(d);
        for (int x : cls) done.insert(x);
        if (!firstg) out << " ";
        if (cls.size() == 1) {
            out << u.domain_name(cls[0]) << ";";
        } else {
            out << "{";
            for (size_t i = 0; i < cls.size(); ++i) {
                if (i) out << ", ";
                out << u.domain_name(cls[i]);
            }
            out << "};";
        }
        firstg = false;
    }
    out << " }\n";
    if (!u.hsts_set().empty()) {
        out << "hsts { ";
        bool first = true;
        for (int d : u.hsts_set()) {
            if (!first) out << ", ";
            out << u.domain_name(d);
            first = false;
        }
        out << " }\n";
    }
    for (const auto& [alias, url] : w.url_aliases) {
        out << "url " << alias << " = " << (url.scheme == Scheme::Http ? "http" : "https") << "("
            << u.domain_name(url.domain) << ")";
        if (url.path != alias) out << "/" << url.path;
        out << ";\n";
    }

    out << "attacker ";
    switch (w.attacker.kind) {
        case AttackerSpec::Kind::Web: out << "web(" << u.domain_name(w.attacker.domain) << ")"; break;
        case AttackerSpec::Kind::Network: out << "network"; break;
        case AttackerSpec::Kind::RelatedDomain:
            out << "related(" << u.domain_name(w.attacker.domain) << ")";
            break;
        case AttackerSpec::Kind::Custom:
            out << "custom(" << to_string(*w.attacker.custom, u) << ")";
            break;
    }
    out << " {\n";
    if (!w.attacker_identities.empty()) {
        out << "  identities { ";
        for (size_t i = 0; i < w.attacker_identities.size(); ++i) {
            if (i) out << ", ";
            out << w.attacker_identities[i];
        }
        out << " }\n";
    }
    if (!w.attacker_knowledge.empty()) {
        out << "  knowledge { ";
        for (size_t i = 0; i < w.attacker_knowledge.size(); ++i) {
            if (i) out << ", ";
            const auto& [nid, ann] = w.attacker_knowledge[i];
            out << "#" << to_string(ann.label, u) << ":" << w.config_names.at(nid);
        }
        out << " }\n";
    }
    out << "}\n";

    for (const auto& [key, name] : w.passwords)
        out << "password " << key.first << " @ " << w.url_name(key.second) << " = #"
            << to_string(name.ann->label, u) << ":" << w.config_names.at(name.name) << ";\n";

    for (const auto& [ref, attrs] : w.cookie_attrs) {
        out << "cookie " << ref << " @ " << u.domain_name(attrs.domain) << " : "
            << to_string(w.env.globals.at(ref), u);
        std::vector<std::string> as;
        if (attrs.prefix == CookiePrefix::Host) as.push_back("host_prefix");
        else if (attrs.prefix == CookiePrefix::Secure) as.push_back("secure_prefix");
        else if (attrs.secure) as.push_back("secure");
        if (attrs.domain_attribute)
            as.push_back("domain(" + u.domain_name(*attrs.domain_attribute) + ")");
        if (!as.empty()) {
            out << " attrs { ";
            for (size_t i = 0; i < as.size(); ++i) {
                if (i) out << ", ";
                out << as[i];
            }
            out << " }";
        }
        out << ";\n";
    }
    for (const auto& [r, ty] : w.env.globals) {
        if (w.cookie_attrs.count(r)) continue;
        out << "global " << r << " : " << to_string(ty, u) << ";\n";
    }
    for (const auto& [r, ty] : w.env.sessions)
        out << "session " << r << " : " << to_string(ty, u) << ";\n";
    for (const auto& [url, ty] : w.env.urls) {
        out << "urltype " << w.url_name(url) << " : (" << to_string(ty.conn, u) << ", [";
        for (size_t i = 0; i < ty.params.size(); ++i) {
            if (i) out << ", ";
            out << to_string(ty.params[i], u);
        }
        out << "], " << to_string(ty.reply_integ, u) << ");\n";
    }
    for (const auto& [tag, ty] : w.env.forms) {
        out << "formtype " << tag << " : (" << to_string(ty.conn, u) << ", [";
        for (size_t i = 0; i < ty.params.size(); ++i) {
            if (i) out << ", ";
            out << to_string(ty.params[i], u);
        }
        out << "], " << to_string(ty.reply_integ, u) << ");\n";
    }
    if (!w.protected_urls.empty()) {
        out << "protected { ";
        for (size_t i = 0; i < w.protected_urls.size(); ++i) {
            if (i) out << ", ";
            out << w.url_name(w.protected_urls[i]);
        }
        out << " }\n";
    }

    out << "server {\n";
    for (const auto& ep : w.endpoints) {
        out << "  listen(" << w.url_name(ep.url) << ")[";
        for (size_t i = 0; i < ep.cookies.size(); ++i) {
            if (i) out << ", ";
            out << ep.cookies[i];
        }
        out << "](";
        for (size_t i = 0; i < ep.params.size(); ++i) {
            if (i) out << ", ";
            out << ep.params[i];
        }
        out << ") {\n" << print_command(ep.body, w, 2) << "\n  }\n";
    }
    out << "}\n";

    if (!w.actions.empty()) {
        out << "actions {\n";
        for (const auto& a : w.actions) {
            out << "  ";
            switch (a.kind) {
                case UserAction::Kind::Halt: out << "halt"; break;
                case UserAction::Kind::Load:
                    out << "load(" << a.tab << ", " << w.url_name(a.url) << ")";
                    break;
                case UserAction::Kind::Submit:
                    out << "submit(" << a.tab << ", " << w.url_name(a.url) << ", " << a.form_tag
                        << ")";
                    break;
            }
            if (a.kind != UserAction::Kind::Halt) {
                out << " { ";
                bool first = true;
                for (const auto& [k, v] : a.inputs) {
                    if (!first) out << ", ";
                    std::string vs = v.kind == Value::Kind::Identity ? v.s : print_value(v, w);
                    out << k << " -> " << vs << " ^ " << to_string(*v.ann, u);
                    first = false;
                }
                out << (first ? "}" : " }");
            }
            out << ";\n";
        }
        out << "}\n";
    }
    return out.str();
}

}  // namespace sessint
