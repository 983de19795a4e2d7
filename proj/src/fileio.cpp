#include "goh/fileio.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace goh {

using nlohmann::json;

namespace {

std::string escape_pointer(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

bool bare_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

class TomlParser {
 public:
  TomlParser(std::string_view text, const std::string& source) : text_(text) { doc_.source = source; }

  Document run() {
    current_ = &doc_.root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        header();
      } else {
        key_value();
      }
    }
    return std::move(doc_);
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  Document doc_;
  json* current_ = nullptr;
  std::string current_ptr_;
  std::set<std::string> defined_tables_;

  bool eof() const { return pos_ >= text_.size(); }
  char peek(std::size_t ahead = 0) const { return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0'; }
  char get() {
    const char c = text_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw FileError(doc_.source + ":" + std::to_string(line_) + ":" + std::to_string(col_) + ": " + msg);
  }

  void skip_spaces() {
    while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) get();
  }
  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') get();
    }
  }
  void skip_blank_lines() {
    while (!eof()) {
      skip_spaces();
      skip_comment();
      if (peek() == '\n') {
        get();
      } else {
        return;
      }
    }
  }
  // Whitespace, newlines and comments inside arrays and inline tables.
  void skip_all() {
    while (!eof()) {
      skip_spaces();
      skip_comment();
      if (peek() != '\n') return;
      get();
    }
  }
  void end_of_line() {
    skip_spaces();
    skip_comment();
    if (eof()) return;
    if (peek() != '\n') fail(std::string("unexpected '") + peek() + "' after value");
    get();
  }

  std::string key() {
    skip_spaces();
    if (peek() == '"') return basic_string();
    std::string k;
    while (!eof() && bare_char(peek())) k += get();
    if (k.empty()) fail("expected a key");
    return k;
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts{key()};
    skip_spaces();
    while (peek() == '.') {
      get();
      parts.push_back(key());
      skip_spaces();
    }
    return parts;
  }

  void header() {
    get();
    const bool array = peek() == '[';
    if (array) get();
    const int line = line_;
    const auto parts = dotted_key();
    if (peek() != ']') fail("expected ']'");
    get();
    if (array) {
      if (peek() != ']') fail("expected ']]'");
      get();
    }
    if (!array) {
      std::string ptr;
      for (const auto& p : parts) ptr += "/" + escape_pointer(p);
      if (!defined_tables_.insert(ptr).second) fail("table [" + ptr.substr(1) + "] defined twice");
    }
    end_of_line();

    json* node = &doc_.root;
    std::string ptr;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      ptr += "/" + escape_pointer(parts[k]);
      const bool last = k + 1 == parts.size();
      if (!node->contains(parts[k])) {
        (*node)[parts[k]] = (last && array) ? json::array() : json::object();
        doc_.lines.emplace(ptr, line);
      }
      json& child = (*node)[parts[k]];
      if (last && array) {
        if (!child.is_array()) fail("'" + parts[k] + "' is not an array of tables");
        child.push_back(json::object());
        ptr += "/" + std::to_string(child.size() - 1);
        doc_.lines.emplace(ptr, line);
        node = &child.back();
      } else if (child.is_array() && !child.empty() && child.back().is_object()) {
        ptr += "/" + std::to_string(child.size() - 1);
        node = &child.back();
      } else if (child.is_object()) {
        node = &child;
      } else {
        fail("'" + parts[k] + "' is already a value");
      }
    }
    current_ = node;
    current_ptr_ = ptr;
  }

  void key_value() {
    const int line = line_;
    const std::string k = key();
    skip_spaces();
    if (peek() != '=') fail("expected '=' after key '" + k + "'");
    get();
    skip_spaces();
    json v = value();
    if (current_->contains(k)) fail("duplicate key '" + k + "'");
    (*current_)[k] = std::move(v);
    doc_.lines.emplace(current_ptr_ + "/" + escape_pointer(k), line);
    end_of_line();
  }

  json value() {
    const char c = peek();
    if (c == '"') return basic_string();
    if (c == '[') return array();
    if (c == '{') return inline_table();
    return scalar();
  }

  std::string basic_string() {
    get();
    std::string s;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == '"') break;
      if (c != '\\') {
        s += c;
        continue;
      }
      const char e = eof() ? '\0' : get();
      switch (e) {
        case '"': s += '"'; break;
        case '\\': s += '\\'; break;
        case 'n': s += '\n'; break;
        case 't': s += '\t'; break;
        default: fail(std::string("unsupported escape '\\") + e + "'");
      }
    }
    return s;
  }

  json array() {
    get();
    json a = json::array();
    while (true) {
      skip_all();
      if (eof()) fail("unterminated array");
      if (peek() == ']') {
        get();
        return a;
      }
      a.push_back(value());
      skip_all();
      if (eof()) fail("unterminated array");
      if (peek() == ',') {
        get();
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  json inline_table() {
    get();
    json t = json::object();
    while (true) {
      skip_all();
      if (eof()) fail("unterminated inline table");
      if (peek() == '}') {
        get();
        return t;
      }
      const std::string k = key();
      skip_spaces();
      if (peek() != '=') fail("expected '=' after key '" + k + "'");
      get();
      skip_spaces();
      if (t.contains(k)) fail("duplicate key '" + k + "'");
      t[k] = value();
      skip_all();
      if (eof()) fail("unterminated inline table");
      if (peek() == ',') {
        get();
      } else if (peek() != '}') {
        fail("expected ',' or '}' in inline table");
      }
    }
  }

  json scalar() {
    std::string tok;
    while (!eof() && (bare_char(peek()) || peek() == '.' || peek() == '+')) tok += get();
    if (tok.empty()) fail("expected a value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string t;
    for (char c : tok) {
      if (c != '_') t += c;
    }
    const std::string body = (t[0] == '+' || t[0] == '-') ? t.substr(1) : t;
    const double sign = t[0] == '-' ? -1.0 : 1.0;
    if (body == "inf") return sign * std::numeric_limits<double>::infinity();
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    const bool integral = !body.empty() && body.find_first_not_of("0123456789") == std::string::npos;
    try {
      std::size_t used = 0;
      if (integral) {
        const long long v = std::stoll(t, &used);
        if (used == t.size()) return v;
      } else {
        const double v = std::stod(t, &used);
        if (used == t.size() && std::isdigit(static_cast<unsigned char>(body[0]))) return v;
      }
    } catch (const std::exception&) {
    }
    fail("invalid value '" + tok + "'");
  }
};

bool is_bare(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!bare_char(c)) return false;
  }
  return true;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string key_text(const std::string& k) { return is_bare(k) ? k : quote(k); }

std::string value_text(const json& v) {
  switch (v.type()) {
    case json::value_t::string: return quote(v.get<std::string>());
    case json::value_t::boolean: return v.get<bool>() ? "true" : "false";
    case json::value_t::number_integer:
    case json::value_t::number_unsigned: return v.dump();
    case json::value_t::number_float: {
      const double d = v.get<double>();
      if (std::isnan(d)) return "nan";
      if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
      std::string s = format_number(d);
      if (s.find_first_of(".eE") == std::string::npos) s += ".0";
      return s;
    }
    case json::value_t::array: {
      std::string s = "[";
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + value_text(v[i]);
      return s + "]";
    }
    case json::value_t::object: {
      std::string s = "{";
      bool first = true;
      for (const auto& [k, x] : v.items()) {
        s += (first ? "" : ", ") + key_text(k) + " = " + value_text(x);
        first = false;
      }
      return s + "}";
    }
    default: throw std::invalid_argument("value has no TOML form: " + v.dump());
  }
}

void write_table(const json& t, const std::string& prefix, std::ostringstream& out) {
  for (const auto& [k, v] : t.items()) {
    if (!v.is_object()) out << key_text(k) << " = " << value_text(v) << "\n";
  }
  for (const auto& [k, v] : t.items()) {
    if (!v.is_object()) continue;
    const std::string name = prefix.empty() ? key_text(k) : prefix + "." + key_text(k);
    out << "\n[" << name << "]\n";
    write_table(v, name, out);
  }
}

// Typed access to document values with located errors.
class Reader {
 public:
  explicit Reader(const Document& doc) : doc_(doc) {}

  [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
    throw FileError(doc_.where(ptr) + ": " + (ptr.empty() ? "" : ptr.substr(1) + ": ") + msg);
  }

  const json* find(const json& table, const std::string& key) const {
    const auto it = table.find(key);
    return it == table.end() ? nullptr : &*it;
  }

  const json& need(const json& table, const std::string& key, const std::string& ptr) const {
    const json* v = find(table, key);
    if (!v) fail(ptr, "missing key '" + key + "'");
    return *v;
  }

  double number(const json& v, const std::string& ptr) const {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
      if (s == "-inf") return -std::numeric_limits<double>::infinity();
      try {
        return parse_constant(s);
      } catch (const std::exception& e) {
        fail(ptr, "bad constant '" + s + "': " + e.what());
      }
    }
    fail(ptr, "expected a number");
  }

  int integer(const json& v, const std::string& ptr) const {
    const double d = number(v, ptr);
    if (d != std::floor(d) || std::abs(d) > 1e9) fail(ptr, "expected an integer");
    return static_cast<int>(d);
  }

  Eigen::VectorXd vector(const json& v, int size, const std::string& ptr) const {
    if (!v.is_array()) fail(ptr, "expected an array of numbers");
    if (size >= 0 && static_cast<int>(v.size()) != size) {
      fail(ptr, "expected " + std::to_string(size) + " entries, found " + std::to_string(v.size()));
    }
    Eigen::VectorXd out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = number(v[i], ptr + "/" + std::to_string(i));
    return out;
  }

  std::string string(const json& v, const std::string& ptr) const {
    if (!v.is_string()) fail(ptr, "expected a string");
    return v.get<std::string>();
  }

  Expr expr(const json& v, const Dims& dims, const std::string& ptr) const {
    if (v.is_number()) return Expr::constant(v.get<double>());
    const std::string s = string(v, ptr);
    try {
      return Expr::parse(s, dims);
    } catch (const ParseError& e) {
      fail(ptr, "column " + std::to_string(e.column()) + ": " + e.what());
    } catch (const std::exception& e) {
      fail(ptr, e.what());
    }
  }

  std::vector<std::string> strings(const json& v, int size, const std::string& ptr) const {
    if (!v.is_array()) fail(ptr, "expected an array of strings");
    if (size >= 0 && static_cast<int>(v.size()) != size) {
      fail(ptr, "expected " + std::to_string(size) + " entries, found " + std::to_string(v.size()));
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto& x = v[i];
      out.push_back(x.is_number() ? format_number(x.get<double>()) : string(x, ptr + "/" + std::to_string(i)));
    }
    return out;
  }

  NonsmoothField field(const json& v, int size, const Dims& dims, const std::string& ptr) const {
    const auto comps = strings(v, size, ptr);
    try {
      return NonsmoothField::parse(comps, dims);
    } catch (const std::exception& e) {
      fail(ptr, e.what());
    }
  }

  PolyhedralCone cone(const json& v, int dim, const std::string& ptr) const {
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      if (static_cast<int>(s.size()) != dim) fail(ptr, "sign string needs " + std::to_string(dim) + " characters");
      try {
        return PolyhedralCone::from_signs(s);
      } catch (const std::exception& e) {
        fail(ptr, e.what());
      }
    }
    if (!v.is_object()) fail(ptr, "expected a sign string or a table with generators");
    return generated_cone(v, dim, ptr);
  }

  PolyhedralCone generated_cone(const json& t, int dim, const std::string& ptr) const {
    const json& gens = need(t, "generators", ptr);
    if (!gens.is_array()) fail(ptr + "/generators", "expected an array of vectors");
    std::vector<Eigen::VectorXd> g;
    for (std::size_t i = 0; i < gens.size(); ++i) {
      g.push_back(vector(gens[i], dim, ptr + "/generators/" + std::to_string(i)));
    }
    std::vector<bool> lines(g.size(), false);
    if (const json* l = find(t, "lines")) {
      if (!l->is_array() || l->size() != g.size()) fail(ptr + "/lines", "expected one flag per generator");
      for (std::size_t i = 0; i < l->size(); ++i) {
        if (!(*l)[i].is_boolean()) fail(ptr + "/lines/" + std::to_string(i), "expected true or false");
        lines[i] = (*l)[i].get<bool>();
      }
    }
    return PolyhedralCone(dim, std::move(g), std::move(lines));
  }

  Multicone multicone(const json& v, int dim, const std::string& ptr) const {
    if (!v.is_array()) fail(ptr, "expected an array of cones");
    Multicone out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(cone(v[i], dim, ptr + "/" + std::to_string(i)));
    return out;
  }

  const json& table(const json& root, const std::string& name) const {
    const json& t = need(root, name, "");
    if (!t.is_object()) fail("/" + name, "expected a table");
    return t;
  }

 private:
  const Document& doc_;
};

const std::set<std::string> problem_keys = {"n",   "m",         "m1",  "q",  "drift", "g", "l0", "l1",
                                            "recession", "psi", "x0", "K",  "norm",  "rho"};

}  // namespace

std::string Document::where(const std::string& pointer) const {
  std::string p = pointer;
  while (true) {
    const auto it = lines.find(p);
    if (it != lines.end()) return source + ":" + std::to_string(it->second);
    if (p.empty()) return source;
    p = p.substr(0, p.rfind('/'));
  }
}

Document parse_toml(std::string_view text, const std::string& source) { return TomlParser(text, source).run(); }

Document read_toml(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_toml(ss.str(), path.string());
}

std::string write_toml(const json& root) {
  if (!root.is_object()) throw std::invalid_argument("TOML documents are tables");
  std::ostringstream out;
  write_table(root, "", out);
  std::string s = out.str();
  if (!s.empty() && s[0] == '\n') s.erase(0, 1);
  return s;
}

std::vector<std::string> variant_names(const Document& doc) {
  std::vector<std::string> out;
  const auto it = doc.root.find("variant");
  if (it == doc.root.end() || !it->is_object()) return out;
  for (const auto& [k, v] : it->items()) out.push_back(k);
  return out;
}

StrictProblem load_problem(const Document& doc, const std::string& variant) {
  const Reader r(doc);
  const json& base = r.table(doc.root, "problem");
  std::map<std::string, std::pair<const json*, std::string>> keys;
  for (const auto& [k, v] : base.items()) {
    if (!problem_keys.contains(k)) r.fail("/problem/" + escape_pointer(k), "unknown key");
    keys[k] = {&v, "/problem/" + escape_pointer(k)};
  }
  if (!variant.empty()) {
    const auto vit = doc.root.find("variant");
    if (vit == doc.root.end() || !vit->contains(variant)) {
      throw FileError(doc.source + ": unknown variant '" + variant + "'");
    }
    const std::string vp = "/variant/" + escape_pointer(variant);
    for (const auto& [k, v] : (*vit)[variant].items()) {
      if (!problem_keys.contains(k)) r.fail(vp + "/" + escape_pointer(k), "unknown key");
      keys[k] = {&v, vp + "/" + escape_pointer(k)};
    }
  }
  auto get = [&](const std::string& k) -> const std::pair<const json*, std::string>* {
    const auto it = keys.find(k);
    return it == keys.end() ? nullptr : &it->second;
  };
  auto need = [&](const std::string& k) -> const std::pair<const json*, std::string>& {
    const auto* v = get(k);
    if (!v) r.fail("/problem", "missing key '" + k + "'");
    return *v;
  };

  StrictProblem P;
  P.n = r.integer(*need("n").first, need("n").second);
  if (P.n < 1) r.fail(need("n").second, "n must be positive");
  P.m = r.integer(*need("m").first, need("m").second);
  P.m1 = get("m1") ? r.integer(*get("m1")->first, get("m1")->second) : P.m;
  P.q = get("q") ? r.integer(*get("q")->first, get("q")->second) : 0;
  if (P.m < 0 || P.q < 0) r.fail("/problem", "m and q must be nonnegative");
  const Dims d = P.dims();

  if (const auto* v = get("drift")) {
    P.f = r.field(*v->first, P.n, d, v->second);
  } else {
    P.f = NonsmoothField::parse(std::vector<std::string>(P.n, "0"), d);
  }
  const auto& gv = need("g");
  if (!gv.first->is_array() || static_cast<int>(gv.first->size()) != P.m) {
    r.fail(gv.second, "expected " + std::to_string(P.m) + " control fields");
  }
  for (int i = 0; i < P.m; ++i) P.g.push_back(r.field((*gv.first)[i], P.n, d, gv.second + "/" + std::to_string(i)));
  if (const auto* v = get("l0")) P.l0 = r.expr(*v->first, d, v->second);
  if (const auto* v = get("l1")) P.l1 = r.expr(*v->first, d, v->second);
  if (const auto* v = get("recession")) P.recession = r.expr(*v->first, d, v->second);

  const auto& pv = need("psi");
  std::vector<VarRef> tx{{VarKind::t, 0}};
  for (int i = 0; i < P.n; ++i) tx.push_back({VarKind::x, i});
  P.psi = NonsmoothField({r.expr(*pv.first, d, pv.second)}, tx);
  const auto& xv = need("x0");
  P.x0 = r.vector(*xv.first, P.n, xv.second);
  if (const auto* v = get("K")) P.K = r.number(*v->first, v->second);
  if (const auto* v = get("norm")) {
    const std::string s = r.string(*v->first, v->second);
    if (s == "euclidean") {
      P.norm = NormKind::euclidean;
    } else if (s == "l1") {
      P.norm = NormKind::l1;
    } else {
      r.fail(v->second, "norm must be \"euclidean\" or \"l1\"");
    }
  }
  if (const auto* v = get("rho")) P.rho = r.number(*v->first, v->second);

  if (const json* c = r.find(doc.root, "cone")) {
    P.C = r.generated_cone(*c, P.m, "/cone");
  } else {
    P.C = PolyhedralCone::whole_space(P.m);
  }
  if (const json* a = r.find(doc.root, "A")) {
    P.a_lower = r.vector(r.need(*a, "lower", "/A"), P.q, "/A/lower");
    P.a_upper = r.vector(r.need(*a, "upper", "/A"), P.q, "/A/upper");
  } else if (P.q > 0) {
    r.fail("", "[A] bounds are required when q > 0");
  } else {
    P.a_lower.resize(0);
    P.a_upper.resize(0);
  }
  if (const json* t = r.find(doc.root, "target")) {
    if (const json* c = r.find(*t, "constraints")) {
      const auto cs = r.strings(*c, -1, "/target/constraints");
      for (std::size_t i = 0; i < cs.size(); ++i) {
        P.target_constraints.push_back(r.expr((*c)[i], d, "/target/constraints/" + std::to_string(i)));
      }
    }
    if (const json* c = r.find(*t, "cones")) P.target = r.multicone(*c, P.n + 1, "/target/cones");
  }
  try {
    P.validate();
  } catch (const std::invalid_argument& e) {
    throw FileError(doc.source + ": " + e.what());
  }
  return P;
}

ControlSchedule load_schedule(const Document& doc, const StrictProblem& P) {
  const Reader r(doc);
  const json& proc = r.table(doc.root, "process");
  const json& pieces = r.need(proc, "pieces", "/process");
  if (!pieces.is_array() || pieces.empty()) r.fail("/process/pieces", "process has no pieces");
  ControlSchedule ctrl;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const std::string ptr = "/process/pieces/" + std::to_string(k);
    const json& t = pieces[k];
    if (!t.is_object()) r.fail(ptr, "expected an inline table");
    ControlPiece p;
    p.duration = r.number(r.need(t, "duration", ptr), ptr + "/duration");
    p.w0 = r.number(r.need(t, "w0", ptr), ptr + "/w0");
    p.w = r.vector(r.need(t, "w", ptr), P.m, ptr + "/w");
    if (const json* a = r.find(t, "alpha")) {
      p.alpha = r.vector(*a, P.q, ptr + "/alpha");
    } else if (P.q == 0) {
      p.alpha.resize(0);
    } else {
      r.fail(ptr, "missing key 'alpha'");
    }
    if (const json* z = r.find(t, "zeta")) p.zeta = r.number(*z, ptr + "/zeta");
    if (!(p.duration > 0)) r.fail(ptr + "/duration", "durations must be positive");
    ctrl.push_back(std::move(p));
  }
  if (const json* s = r.find(proc, "S")) {
    const double S = r.number(*s, "/process/S");
    if (std::abs(S - schedule_length(ctrl)) > 1e-9 * (1 + S)) r.fail("/process/S", "S differs from the total duration");
  }
  try {
    validate_schedule(P, ctrl);
  } catch (const std::invalid_argument& e) {
    throw FileError(doc.where("/process/pieces") + ": " + e.what());
  }
  return ctrl;
}

std::optional<Multicone> load_target(const Document& doc, const StrictProblem& P) {
  const Reader r(doc);
  const json* t = r.find(doc.root, "target");
  if (!t) return std::nullopt;
  const json* c = r.find(*t, "cones");
  if (!c) return std::nullopt;
  return r.multicone(*c, P.n + 1, "/target/cones");
}

bool has_multipliers(const Document& doc) { return doc.root.contains("multipliers"); }

MultiplierSpec load_multipliers(const Document& doc, const StrictProblem& P) {
  const Reader r(doc);
  const json& t = r.table(doc.root, "multipliers");
  MultiplierSpec m;
  if (const json* v = r.find(t, "p0")) m.p0 = r.number(*v, "/multipliers/p0");
  if (const json* v = r.find(t, "lambda")) m.lambda = r.number(*v, "/multipliers/lambda");
  if (const json* v = r.find(t, "pi")) m.pi = r.number(*v, "/multipliers/pi");
  const json* p = r.find(t, "p");
  const json* pf = r.find(t, "p_final");
  if ((p != nullptr) == (pf != nullptr)) r.fail("/multipliers", "give exactly one of 'p' and 'p_final'");
  if (p) {
    r.strings(*p, P.n, "/multipliers/p");
    for (int i = 0; i < P.n; ++i) m.p.push_back(r.expr((*p)[i], P.dims(), "/multipliers/p/" + std::to_string(i)));
  } else {
    m.p_final = r.vector(*pf, P.n, "/multipliers/p_final");
  }
  if (const json* pol = r.find(t, "policy")) {
    if (p) r.fail("/multipliers/policy", "a policy only applies with 'p_final'");
    if (!pol->is_object()) r.fail("/multipliers/policy", "expected a table of kink signs");
    for (const auto& [k, v] : pol->items()) {
      const std::string ptr = "/multipliers/policy/" + escape_pointer(k);
      const int sgn = r.integer(v, ptr);
      if (sgn < -1 || sgn > 1) r.fail(ptr, "signs are -1, 0 or 1");
      m.policy.entries[k] = sgn;
    }
  }
  return m;
}

StrictInput load_strict(const Document& doc, const StrictProblem& P) {
  const Reader r(doc);
  const json& t = r.table(doc.root, "strict");
  const json& pieces = r.need(t, "pieces", "/strict");
  if (!pieces.is_array() || pieces.empty()) r.fail("/strict/pieces", "process has no pieces");
  StrictInput out;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const std::string ptr = "/strict/pieces/" + std::to_string(k);
    const json& x = pieces[k];
    if (!x.is_object()) r.fail(ptr, "expected an inline table");
    StrictPiece p;
    p.duration = r.number(r.need(x, "duration", ptr), ptr + "/duration");
    if (!(p.duration > 0)) r.fail(ptr + "/duration", "durations must be positive");
    p.u = r.vector(r.need(x, "u", ptr), P.m, ptr + "/u");
    if (const json* a = r.find(x, "a")) {
      p.a = r.vector(*a, P.q, ptr + "/a");
    } else if (P.q == 0) {
      p.a.resize(0);
    } else {
      r.fail(ptr, "missing key 'a'");
    }
    out.process.pieces.push_back(std::move(p));
  }
  if (const json* rates = r.find(t, "rates")) {
    const Eigen::VectorXd v = r.vector(*rates, static_cast<int>(pieces.size()), "/strict/rates");
    for (int i = 0; i < v.size(); ++i) {
      if (!(v[i] > 0)) r.fail("/strict/rates", "rates must be positive");
      out.rates.push_back(v[i]);
    }
  }
  return out;
}

json schedule_json(const ControlSchedule& ctrl) {
  json pieces = json::array();
  for (const auto& p : ctrl) {
    json t;
    t["duration"] = p.duration;
    t["w0"] = p.w0;
    t["w"] = json::array();
    for (int i = 0; i < p.w.size(); ++i) t["w"].push_back(p.w[i]);
    if (p.alpha.size() > 0) {
      t["alpha"] = json::array();
      for (int i = 0; i < p.alpha.size(); ++i) t["alpha"].push_back(p.alpha[i]);
    }
    if (p.zeta != 0.0) t["zeta"] = p.zeta;
    pieces.push_back(std::move(t));
  }
  return {{"process", {{"S", schedule_length(ctrl)}, {"pieces", pieces}}}};
}

std::optional<BracketProbe> load_probe(const Document& doc, const StrictProblem& P) {
  const Reader r(doc);
  const json* t = r.find(doc.root, "bracket_probe");
  if (!t) return std::nullopt;
  BracketProbe b;
  b.point = r.vector(r.need(*t, "point", "/bracket_probe"), P.n, "/bracket_probe/point");
  const Eigen::VectorXd pair = r.vector(r.need(*t, "pair", "/bracket_probe"), 2, "/bracket_probe/pair");
  b.i = static_cast<int>(pair[0]) - 1;
  b.j = static_cast<int>(pair[1]) - 1;
  if (b.i < 0 || b.j < 0 || b.i >= P.m || b.j >= P.m || b.i == b.j || pair[0] != b.i + 1 || pair[1] != b.j + 1) {
    r.fail("/bracket_probe/pair", "expected two distinct control indices in 1.." + std::to_string(P.m));
  }
  if (const json* c = r.find(*t, "reference")) {
    if (!c->is_array() || c->empty()) r.fail("/bracket_probe/reference", "expected an array of vectors");
    for (std::size_t i = 0; i < c->size(); ++i) {
      b.claimed.push_back(r.vector((*c)[i], P.n, "/bracket_probe/reference/" + std::to_string(i)));
    }
  }
  return b;
}

}  // namespace goh
