// SPDX-License-Identifier: Apache-2.0

#include "vulnkit/ir.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "vulnkit/error.hpp"

namespace vulnkit {

namespace {

constexpr std::array<std::string_view, 11> kOpNames = {"add", "sub", "mul", "div", "mod", "eq",
                                                       "ne",  "lt",  "le",  "gt",  "ge"};

template <class... Ts> struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts> Overloaded(Ts...) -> Overloaded<Ts...>;

} // namespace

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
  case ErrorKind::SyntaxError: return "SyntaxError";
  case ErrorKind::UndefinedLabel: return "UndefinedLabel";
  case ErrorKind::UndefinedCallee: return "UndefinedCallee";
  case ErrorKind::MissingEntry: return "MissingEntry";
  case ErrorKind::InvalidEntry: return "InvalidEntry";
  case ErrorKind::UnknownTarget: return "UnknownTarget";
  case ErrorKind::UnknownStrategy: return "UnknownStrategy";
  case ErrorKind::SolverBudgetExceeded: return "SolverBudgetExceeded";
  case ErrorKind::TargetUnreachable: return "TargetUnreachable";
  case ErrorKind::ArityMismatch: return "ArityMismatch";
  case ErrorKind::EmptyInput: return "EmptyInput";
  case ErrorKind::NoSeeds: return "NoSeeds";
  case ErrorKind::UnknownMode: return "UnknownMode";
  case ErrorKind::UnknownVulnerability: return "UnknownVulnerability";
  case ErrorKind::Underdetermined: return "Underdetermined";
  case ErrorKind::SingularDesign: return "SingularDesign";
  case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

std::string_view to_string(BinOp op) noexcept { return kOpNames[static_cast<std::size_t>(op)]; }

std::optional<BinOp> parse_binop(std::string_view text) noexcept {
  for (std::size_t i = 0; i < kOpNames.size(); ++i)
    if (kOpNames[i] == text) return static_cast<BinOp>(i);
  return std::nullopt;
}

bool is_comparison(BinOp op) noexcept { return op >= BinOp::Eq; }

std::optional<std::int64_t> apply_binop(BinOp op, std::int64_t lhs, std::int64_t rhs) noexcept {
  const auto ul = static_cast<std::uint64_t>(lhs);
  const auto ur = static_cast<std::uint64_t>(rhs);
  switch (op) {
  case BinOp::Add: return static_cast<std::int64_t>(ul + ur);
  case BinOp::Sub: return static_cast<std::int64_t>(ul - ur);
  case BinOp::Mul: return static_cast<std::int64_t>(ul * ur);
  case BinOp::Div:
    if (rhs == 0) return std::nullopt;
    if (lhs == std::numeric_limits<std::int64_t>::min() && rhs == -1) return lhs;
    return lhs / rhs;
  case BinOp::Mod:
    if (rhs == 0) return std::nullopt;
    if (rhs == -1) return 0;
    return lhs % rhs;
  case BinOp::Eq: return lhs == rhs ? 1 : 0;
  case BinOp::Ne: return lhs != rhs ? 1 : 0;
  case BinOp::Lt: return lhs < rhs ? 1 : 0;
  case BinOp::Le: return lhs <= rhs ? 1 : 0;
  case BinOp::Gt: return lhs > rhs ? 1 : 0;
  case BinOp::Ge: return lhs >= rhs ? 1 : 0;
  }
  return std::nullopt;
}

bool is_terminator(const Instr& in) noexcept {
  return std::holds_alternative<instr::Br>(in) || std::holds_alternative<instr::Jmp>(in) ||
         std::holds_alternative<instr::Ret>(in);
}

bool Function::returns_value() const {
  return std::any_of(code.begin(), code.end(), [](const Instr& in) {
    const auto* r = std::get_if<instr::Ret>(&in);
    return r != nullptr && r->value.has_value();
  });
}

std::optional<int> Function::find_block(std::string_view label) const {
  for (std::size_t i = 0; i < blocks.size(); ++i)
    if (blocks[i].label == label) return static_cast<int>(i);
  return std::nullopt;
}

std::optional<FunctionId> Program::find(std::string_view name) const {
  for (std::size_t i = 0; i < functions.size(); ++i)
    if (functions[i].name == name) return static_cast<FunctionId>(i);
  return std::nullopt;
}

FunctionId Program::id_of(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw Error(ErrorKind::UnknownTarget, "unknown function '" + std::string(name) + "'");
}

std::size_t Program::instruction_count() const {
  std::size_t n = 0;
  for (const auto& f : functions) n += f.code.size();
  return n;
}

// ---------------------------------------------------------------------------
// Lexing

namespace {

struct Token {
  enum class Kind { Ident, Int, LParen, RParen, Colon, Equals, LBrack, RBrack };
  Kind kind;
  std::string text;
  std::int64_t value = 0;

  bool is(Kind k) const { return kind == k; }
  bool is_ident(std::string_view s) const { return kind == Kind::Ident && text == s; }
};

[[noreturn]] void syntax_error(int line, const std::string& msg) {
  throw Error(ErrorKind::SyntaxError, "line " + std::to_string(line) + ": " + msg, line);
}

std::vector<Token> lex_line(std::string_view s, int line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      ++i;
      continue;
    }
    if (c == '#') break;
    auto single = [&](Token::Kind k) {
      out.push_back({k, std::string(1, c)});
      ++i;
    };
    switch (c) {
    case '(': single(Token::Kind::LParen); continue;
    case ')': single(Token::Kind::RParen); continue;
    case ':': single(Token::Kind::Colon); continue;
    case '=': single(Token::Kind::Equals); continue;
    case '[': single(Token::Kind::LBrack); continue;
    case ']': single(Token::Kind::RBrack); continue;
    default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      std::size_t j = i + 1;
      while (j < s.size() && std::isalnum(static_cast<unsigned char>(s[j]))) ++j;
      std::string_view lit = s.substr(i, j - i);
      const bool neg = lit.front() == '-';
      std::string_view digits = neg ? lit.substr(1) : lit;
      int base = 10;
      if (digits.size() > 2 && digits[0] == '0' && (digits[1] == 'x' || digits[1] == 'X')) {
        base = 16;
        digits.remove_prefix(2);
      }
      std::uint64_t mag = 0;
      auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), mag, base);
      if (ec != std::errc() || p != digits.data() + digits.size())
        syntax_error(line, "malformed integer literal '" + std::string(lit) + "'");
      const std::uint64_t limit = neg ? (1ULL << 63) : static_cast<std::uint64_t>(
                                                           std::numeric_limits<std::int64_t>::max());
      if (mag > limit) syntax_error(line, "integer literal out of range '" + std::string(lit) + "'");
      const std::int64_t v = neg ? static_cast<std::int64_t>(0 - mag) : static_cast<std::int64_t>(mag);
      out.push_back({Token::Kind::Int, std::string(lit), v});
      i = j;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i + 1;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      out.push_back({Token::Kind::Ident, std::string(s.substr(i, j - i))});
      i = j;
      continue;
    }
    syntax_error(line, std::string("unexpected character '") + c + "'");
  }
  return out;
}

struct Line {
  int number;
  std::vector<Token> tokens;
};

struct RawFunction {
  int header_line;
  std::string name;
  std::vector<Param> params;
  std::vector<Line> body;
};

bool is_keyword(std::string_view s) {
  static constexpr std::array<std::string_view, 10> kw = {"fn",  "buf", "const", "load", "store",
                                                         "br",  "jmp", "call",  "ret",  "assert"};
  return std::find(kw.begin(), kw.end(), s) != kw.end();
}

RawFunction parse_header(const Line& line) {
  const auto& t = line.tokens;
  const int ln = line.number;
  RawFunction fn{ln, {}, {}, {}};
  if (t.size() < 4 || !t[1].is(Token::Kind::Ident) || !t[2].is(Token::Kind::LParen))
    syntax_error(ln, "expected 'fn NAME(params)'");
  fn.name = t[1].text;
  std::size_t i = 3;
  while (i < t.size() && !t[i].is(Token::Kind::RParen)) {
    if (i + 2 >= t.size() || !t[i].is(Token::Kind::Ident) || !t[i + 1].is(Token::Kind::Colon) ||
        !t[i + 2].is(Token::Kind::Ident))
      syntax_error(ln, "expected 'name: int' or 'name: buf[N]' in parameter list");
    Param p;
    p.name = t[i].text;
    if (t[i + 2].text == "int") {
      p.kind = ParamKind::Int;
      i += 3;
    } else if (t[i + 2].text == "buf") {
      p.kind = ParamKind::Buf;
      i += 3;
      if (i < t.size() && t[i].is(Token::Kind::LBrack)) {
        if (i + 2 >= t.size() || !t[i + 1].is(Token::Kind::Int) || !t[i + 2].is(Token::Kind::RBrack) ||
            t[i + 1].value <= 0)
          syntax_error(ln, "expected positive buffer length 'buf[N]'");
        p.length = static_cast<std::size_t>(t[i + 1].value);
        i += 3;
      }
    } else {
      syntax_error(ln, "unknown parameter kind '" + t[i + 2].text + "'");
    }
    for (const auto& q : fn.params)
      if (q.name == p.name) syntax_error(ln, "duplicate parameter '" + p.name + "'");
    fn.params.push_back(std::move(p));
  }
  if (i + 1 != t.size()) syntax_error(ln, "trailing tokens after parameter list");
  return fn;
}

class FunctionBuilder {
public:
  FunctionBuilder(const RawFunction& raw, const std::vector<RawFunction>& all) : raw_(raw), all_(all) {}

  Function build() {
    f_.name = raw_.name;
    f_.params = raw_.params;
    for (auto& p : f_.params) {
      if (p.kind == ParamKind::Int) {
        p.slot = add_int(p.name, raw_.header_line);
      } else {
        p.slot = add_buf(p.name, p.length, true, raw_.header_line);
      }
    }
    collect_declarations();
    for (const auto& line : raw_.body) parse_line(line);
    if (f_.code.empty()) syntax_error(raw_.header_line, "function '" + f_.name + "' has no instructions");
    close_block();
    if (!is_terminator(f_.code.back()))
      syntax_error(last_line_, "control falls off the end of function '" + f_.name + "'");
    if (f_.blocks.back().begin == f_.blocks.back().end)
      syntax_error(last_line_, "empty trailing block '" + f_.blocks.back().label + "'");
    return std::move(f_);
  }

private:
  int add_int(const std::string& name, int line) {
    if (bufs_.count(name)) syntax_error(line, "'" + name + "' is already a buffer");
    auto [it, inserted] = ints_.emplace(name, static_cast<int>(f_.int_slots.size()));
    if (inserted) f_.int_slots.push_back(name);
    return it->second;
  }

  int add_buf(const std::string& name, std::size_t len, bool is_param, int line) {
    if (ints_.count(name) || bufs_.count(name)) syntax_error(line, "'" + name + "' redeclared as a buffer");
    const int slot = static_cast<int>(f_.buf_slots.size());
    bufs_.emplace(name, slot);
    f_.buf_slots.push_back({name, len, is_param});
    return slot;
  }

  // First pass: labels, local buffers and assigned locals, so that forward
  // references resolve.
  void collect_declarations() {
    bool implicit_entry_needed = false;
    bool seen_any = false;
    int block_count = 0;
    for (const auto& line : raw_.body) {
      const auto& t = line.tokens;
      if (t.size() == 2 && t[0].is(Token::Kind::Ident) && t[1].is(Token::Kind::Colon)) {
        if (labels_.count(t[0].text)) syntax_error(line.number, "duplicate label '" + t[0].text + "'");
        if (!seen_any) seen_any = true;
        labels_.emplace(t[0].text, block_count + (implicit_entry_needed ? 1 : 0));
        ++block_count;
        continue;
      }
      if (!t.empty() && t[0].is_ident("buf") && (t.size() < 2 || !t[1].is(Token::Kind::Equals))) {
        if (t.size() != 5 || !t[1].is(Token::Kind::Ident) || !t[2].is(Token::Kind::LBrack) ||
            !t[3].is(Token::Kind::Int) || !t[4].is(Token::Kind::RBrack) || t[3].value <= 0)
          syntax_error(line.number, "expected 'buf NAME[N]'");
        add_buf(t[1].text, static_cast<std::size_t>(t[3].value), false, line.number);
        continue;
      }
      if (!seen_any) {
        implicit_entry_needed = true;
        seen_any = true;
      }
      if (t.size() >= 2 && t[0].is(Token::Kind::Ident) && t[1].is(Token::Kind::Equals)) {
        if (is_keyword(t[0].text)) syntax_error(line.number, "keyword used as variable name");
        add_int(t[0].text, line.number);
      }
    }
    if (implicit_entry_needed) {
      if (labels_.count("entry")) syntax_error(raw_.header_line, "instructions precede the 'entry' label");
      labels_.emplace("entry", 0);
      open_block("entry");
    }
  }

  void open_block(const std::string& label) {
    close_block();
    const auto here = static_cast<InstrIndex>(f_.code.size());
    f_.blocks.push_back({label, here, here});
  }

  void close_block() {
    if (!f_.blocks.empty()) f_.blocks.back().end = static_cast<InstrIndex>(f_.code.size());
  }

  int label_ref(const Token& tok, int line) const {
    if (!tok.is(Token::Kind::Ident)) syntax_error(line, "expected label");
    auto it = labels_.find(tok.text);
    if (it == labels_.end())
      throw Error(ErrorKind::UndefinedLabel,
                  "line " + std::to_string(line) + ": undefined label '" + tok.text + "'", line);
    return it->second;
  }

  Operand int_operand(const Token& tok, int line) const {
    if (tok.is(Token::Kind::Int)) return Operand::imm(tok.value);
    if (!tok.is(Token::Kind::Ident)) syntax_error(line, "expected operand");
    auto it = ints_.find(tok.text);
    if (it == ints_.end()) syntax_error(line, "undeclared variable '" + tok.text + "'");
    return Operand::var(it->second);
  }

  int buf_ref(const Token& tok, int line) const {
    if (!tok.is(Token::Kind::Ident)) syntax_error(line, "expected buffer name");
    auto it = bufs_.find(tok.text);
    if (it == bufs_.end()) syntax_error(line, "undeclared buffer '" + tok.text + "'");
    return it->second;
  }

  // Parses a condition starting at t[i]; advances i.
  Cond parse_cond(const std::vector<Token>& t, std::size_t& i, int line) const {
    if (i >= t.size()) syntax_error(line, "expected condition");
    if (t[i].is(Token::Kind::LParen)) {
      if (i + 4 >= t.size() || !t[i + 1].is(Token::Kind::Ident) || !t[i + 4].is(Token::Kind::RParen))
        syntax_error(line, "expected '(op a b)'");
      auto op = parse_binop(t[i + 1].text);
      if (!op) syntax_error(line, "unknown operator '" + t[i + 1].text + "'");
      if (*op == BinOp::Div || *op == BinOp::Mod) syntax_error(line, "division is not allowed inside a condition");
      Cond c{op, int_operand(t[i + 2], line), int_operand(t[i + 3], line)};
      i += 5;
      return c;
    }
    Cond c{std::nullopt, int_operand(t[i], line), Operand::imm(0)};
    ++i;
    return c;
  }

  Instr parse_call(const std::vector<Token>& t, std::size_t i, std::optional<int> dst, int line) const {
    // t[i] == "call"
    if (i + 2 >= t.size() || !t[i + 1].is(Token::Kind::Ident) || !t[i + 2].is(Token::Kind::LParen) ||
        !t.back().is(Token::Kind::RParen))
      syntax_error(line, "expected 'call NAME(args)'");
    const std::string& callee = t[i + 1].text;
    const RawFunction* target = nullptr;
    FunctionId id = 0;
    for (std::size_t k = 0; k < all_.size(); ++k) {
      if (all_[k].name == callee) {
        target = &all_[k];
        id = static_cast<FunctionId>(k);
      }
    }
    if (target == nullptr)
      throw Error(ErrorKind::UndefinedCallee,
                  "line " + std::to_string(line) + ": undefined callee '" + callee + "'", line);
    std::vector<Token> args(t.begin() + static_cast<std::ptrdiff_t>(i + 3), t.end() - 1);
    if (args.size() != target->params.size())
      syntax_error(line, "call to '" + callee + "' expects " + std::to_string(target->params.size()) +
                             " arguments, got " + std::to_string(args.size()));
    instr::Call call{id, {}, dst};
    for (std::size_t k = 0; k < args.size(); ++k) {
      const Param& p = target->params[k];
      if (p.kind == ParamKind::Int) {
        call.args.push_back(int_operand(args[k], line));
      } else {
        const int slot = buf_ref(args[k], line);
        const auto& have = f_.buf_slots[static_cast<std::size_t>(slot)];
        if (p.length != 0 && have.length != 0 && have.length != p.length)
          syntax_error(line, "buffer '" + have.name + "' has length " + std::to_string(have.length) +
                                 " but parameter '" + p.name + "' expects " + std::to_string(p.length));
        call.args.push_back(Operand::buf(slot));
      }
    }
    return call;
  }

  void parse_line(const Line& line) {
    const auto& t = line.tokens;
    const int ln = line.number;
    last_line_ = ln;
    if (t.size() == 2 && t[0].is(Token::Kind::Ident) && t[1].is(Token::Kind::Colon)) {
      open_block(t[0].text);
      return;
    }
    if (t[0].is_ident("buf") && (t.size() < 2 || !t[1].is(Token::Kind::Equals))) return; // declaration
    auto expect_size = [&](std::size_t n, const char* form) {
      if (t.size() != n) syntax_error(ln, std::string("expected '") + form + "'");
    };
    Instr in;
    if (t.size() >= 3 && t[1].is(Token::Kind::Equals)) {
      const int dst = ints_.at(t[0].text);
      const Token& head = t[2];
      if (!head.is(Token::Kind::Ident)) syntax_error(ln, "expected instruction after '='");
      if (head.text == "const") {
        expect_size(4, "x = const N");
        if (!t[3].is(Token::Kind::Int)) syntax_error(ln, "const expects an integer literal");
        in = instr::Const{dst, t[3].value};
      } else if (head.text == "load") {
        expect_size(5, "x = load BUF IDX");
        in = instr::Load{dst, buf_ref(t[3], ln), int_operand(t[4], ln)};
      } else if (head.text == "call") {
        in = parse_call(t, 2, dst, ln);
      } else if (auto op = parse_binop(head.text)) {
        expect_size(5, "x = op a b");
        in = instr::Bin{dst, *op, int_operand(t[3], ln), int_operand(t[4], ln)};
      } else {
        syntax_error(ln, "unknown instruction '" + head.text + "'");
      }
    } else if (t[0].is_ident("store")) {
      expect_size(4, "store BUF IDX VAL");
      in = instr::Store{buf_ref(t[1], ln), int_operand(t[2], ln), int_operand(t[3], ln)};
    } else if (t[0].is_ident("br")) {
      std::size_t i = 1;
      Cond c = parse_cond(t, i, ln);
      if (i + 2 != t.size()) syntax_error(ln, "expected 'br COND LTRUE LFALSE'");
      in = instr::Br{c, label_ref(t[i], ln), label_ref(t[i + 1], ln)};
    } else if (t[0].is_ident("jmp")) {
      expect_size(2, "jmp LABEL");
      in = instr::Jmp{label_ref(t[1], ln)};
    } else if (t[0].is_ident("call")) {
      in = parse_call(t, 0, std::nullopt, ln);
    } else if (t[0].is_ident("ret")) {
      if (t.size() == 1) {
        in = instr::Ret{};
      } else {
        expect_size(2, "ret [VALUE]");
        in = instr::Ret{int_operand(t[1], ln)};
      }
    } else if (t[0].is_ident("assert")) {
      std::size_t i = 1;
      Cond c = parse_cond(t, i, ln);
      if (i != t.size()) syntax_error(ln, "trailing tokens after assert condition");
      in = instr::Assert{c};
    } else {
      syntax_error(ln, "unrecognised line");
    }
    if (f_.blocks.empty()) syntax_error(ln, "instruction outside of a block");
    f_.code.push_back(std::move(in));
  }

  const RawFunction& raw_;
  const std::vector<RawFunction>& all_;
  Function f_;
  std::unordered_map<std::string, int> ints_;
  std::unordered_map<std::string, int> bufs_;
  std::unordered_map<std::string, int> labels_;
  int last_line_ = 0;
};

void check_entry(const Program& p) {
  auto id = p.find(p.entry);
  if (!id) throw Error(ErrorKind::MissingEntry, "no entry function '" + p.entry + "'");
  const Function& f = p.function(*id);
  if (f.params.size() > 1 || (f.params.size() == 1 && f.params[0].kind != ParamKind::Buf))
    throw Error(ErrorKind::InvalidEntry, "entry function '" + f.name + "' must take at most one buf parameter");
  if (f.params.size() == 1 && f.params[0].length == 0)
    throw Error(ErrorKind::InvalidEntry, "entry buffer parameter '" + f.params[0].name + "' needs a declared length");
}

} // namespace

Program parse_program(std::string_view text, std::string entry) {
  std::vector<RawFunction> raws;
  std::istringstream in{std::string(text)};
  std::string s;
  int number = 0;
  while (std::getline(in, s)) {
    ++number;
    auto tokens = lex_line(s, number);
    if (tokens.empty()) continue;
    if (tokens[0].is_ident("fn")) {
      raws.push_back(parse_header({number, std::move(tokens)}));
      for (std::size_t k = 0; k + 1 < raws.size(); ++k)
        if (raws[k].name == raws.back().name) syntax_error(number, "duplicate function '" + raws.back().name + "'");
      continue;
    }
    if (raws.empty()) syntax_error(number, "statement outside of a function");
    raws.back().body.push_back({number, std::move(tokens)});
  }

  Program p;
  p.entry = std::move(entry);
  if (raws.empty()) throw Error(ErrorKind::MissingEntry, "program has no functions");
  for (const auto& raw : raws) p.functions.push_back(FunctionBuilder(raw, raws).build());
  validate_program(p);
  return p;
}

void validate_program(Program& p) {
  for (std::size_t i = 0; i < p.functions.size(); ++i)
    for (std::size_t j = i + 1; j < p.functions.size(); ++j)
      if (p.functions[i].name == p.functions[j].name)
        throw Error(ErrorKind::SyntaxError, "duplicate function '" + p.functions[i].name + "'");
  check_entry(p);

  for (auto& f : p.functions) {
    auto fail = [&](const std::string& msg) {
      throw Error(ErrorKind::SyntaxError, "function '" + f.name + "': " + msg);
    };
    if (f.code.empty() || f.blocks.empty()) fail("empty body");
    if (f.blocks.front().begin != 0) fail("entry block must start at instruction 0");
    for (std::size_t b = 0; b + 1 < f.blocks.size(); ++b)
      if (f.blocks[b].end != f.blocks[b + 1].begin) fail("blocks are not contiguous");
    if (f.blocks.back().end != static_cast<InstrIndex>(f.code.size())) fail("blocks do not cover the body");
    if (!is_terminator(f.code.back())) fail("control falls off the end");

    f.block_of.assign(f.code.size(), 0);
    for (std::size_t b = 0; b < f.blocks.size(); ++b)
      for (InstrIndex k = f.blocks[b].begin; k < f.blocks[b].end; ++k)
        f.block_of[static_cast<std::size_t>(k)] = static_cast<int>(b);

    const auto nint = static_cast<std::int64_t>(f.int_slots.size());
    const auto nbuf = static_cast<std::int64_t>(f.buf_slots.size());
    const auto nblk = static_cast<int>(f.blocks.size());
    auto check_int = [&](const Operand& o) {
      if (o.kind == Operand::Kind::Buf || (o.kind == Operand::Kind::Var && (o.value < 0 || o.value >= nint)))
        fail("bad integer operand");
    };
    auto check_cond = [&](const Cond& c) {
      check_int(c.lhs);
      check_int(c.rhs);
      if (c.op && (*c.op == BinOp::Div || *c.op == BinOp::Mod)) fail("division inside a condition");
    };
    auto check_slot = [&](int slot, std::int64_t n) {
      if (slot < 0 || slot >= n) fail("bad slot reference");
    };
    auto check_block = [&](int b) {
      if (b < 0 || b >= nblk) fail("bad block reference");
    };
    for (const auto& in : f.code) {
      std::visit(Overloaded{
                     [&](const instr::Const& c) { check_slot(c.dst, nint); },
                     [&](const instr::Bin& c) {
                       check_slot(c.dst, nint);
                       check_int(c.lhs);
                       check_int(c.rhs);
                     },
                     [&](const instr::Load& c) {
                       check_slot(c.dst, nint);
                       check_slot(c.buf, nbuf);
                       check_int(c.index);
                     },
                     [&](const instr::Store& c) {
                       check_slot(c.buf, nbuf);
                       check_int(c.index);
                       check_int(c.value);
                     },
                     [&](const instr::Br& c) {
                       check_cond(c.cond);
                       check_int(c.cond.rhs);
                       check_block(c.on_true);
                       check_block(c.on_false);
                     },
                     [&](const instr::Jmp& c) { check_block(c.target); },
                     [&](const instr::Call& c) {
                       if (c.callee < 0 || c.callee >= static_cast<int>(p.functions.size()))
                         throw Error(ErrorKind::UndefinedCallee, "function '" + f.name + "': bad callee");
                       const auto& callee = p.functions[static_cast<std::size_t>(c.callee)];
                       if (callee.params.size() != c.args.size()) fail("call arity mismatch");
                       for (std::size_t k = 0; k < c.args.size(); ++k) {
                         if (callee.params[k].kind == ParamKind::Buf) {
                           if (c.args[k].kind != Operand::Kind::Buf) fail("buffer argument expected");
                           check_slot(static_cast<int>(c.args[k].value), nbuf);
                         } else {
                           check_int(c.args[k]);
                         }
                       }
                       if (c.dst) check_slot(*c.dst, nint);
                     },
                     [&](const instr::Ret& c) {
                       if (c.value) check_int(*c.value);
                     },
                     [&](const instr::Assert& c) {
                       check_cond(c.cond);
                     },
                 },
                 in);
    }
  }
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string operand_text(const Function& f, const Operand& o) {
  switch (o.kind) {
  case Operand::Kind::Imm: return std::to_string(o.value);
  case Operand::Kind::Var: return f.int_slots[static_cast<std::size_t>(o.value)];
  case Operand::Kind::Buf: return f.buf_slots[static_cast<std::size_t>(o.value)].name;
  }
  return "?";
}

std::string cond_text(const Function& f, const Cond& c) {
  if (!c.op) return operand_text(f, c.lhs);
  return "(" + std::string(to_string(*c.op)) + " " + operand_text(f, c.lhs) + " " + operand_text(f, c.rhs) + ")";
}

} // namespace

std::string print_instr(const Function& f, const Program& p, const Instr& in) {
  const auto var = [&](int slot) { return f.int_slots[static_cast<std::size_t>(slot)]; };
  const auto buf = [&](int slot) { return f.buf_slots[static_cast<std::size_t>(slot)].name; };
  const auto label = [&](int b) { return f.blocks[static_cast<std::size_t>(b)].label; };
  return std::visit(
      Overloaded{
          [&](const instr::Const& c) { return var(c.dst) + " = const " + std::to_string(c.value); },
          [&](const instr::Bin& c) {
            return var(c.dst) + " = " + std::string(to_string(c.op)) + " " + operand_text(f, c.lhs) + " " +
                   operand_text(f, c.rhs);
          },
          [&](const instr::Load& c) { return var(c.dst) + " = load " + buf(c.buf) + " " + operand_text(f, c.index); },
          [&](const instr::Store& c) {
            return "store " + buf(c.buf) + " " + operand_text(f, c.index) + " " + operand_text(f, c.value);
          },
          [&](const instr::Br& c) { return "br " + cond_text(f, c.cond) + " " + label(c.on_true) + " " + label(c.on_false); },
          [&](const instr::Jmp& c) { return "jmp " + label(c.target); },
          [&](const instr::Call& c) {
            std::string s = c.dst ? var(*c.dst) + " = " : std::string();
            s += "call " + p.function(c.callee).name + "(";
            for (std::size_t k = 0; k < c.args.size(); ++k) {
              if (k) s += ", ";
              s += operand_text(f, c.args[k]);
            }
            return s + ")";
          },
          [&](const instr::Ret& c) { return c.value ? "ret " + operand_text(f, *c.value) : std::string("ret"); },
          [&](const instr::Assert& c) { return "assert " + cond_text(f, c.cond); },
      },
      in);
}

std::string print_program(const Program& p) {
  std::ostringstream os;
  bool first = true;
  for (const auto& f : p.functions) {
    if (!first) os << '\n';
    first = false;
    os << "fn " << f.name << '(';
    for (std::size_t k = 0; k < f.params.size(); ++k) {
      const auto& prm = f.params[k];
      if (k) os << ", ";
      os << prm.name << ": ";
      if (prm.kind == ParamKind::Int) {
        os << "int";
      } else {
        os << "buf";
        if (prm.length) os << '[' << prm.length << ']';
      }
    }
    os << ")\n";
    for (const auto& b : f.buf_slots)
      if (!b.is_param) os << "  buf " << b.name << '[' << b.length << "]\n";
    for (const auto& b : f.blocks) {
      os << b.label << ":\n";
      for (InstrIndex k = b.begin; k < b.end; ++k)
        os << "  " << print_instr(f, p, f.code[static_cast<std::size_t>(k)]) << '\n';
    }
  }
  return os.str();
}

} // namespace vulnkit
