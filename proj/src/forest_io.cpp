#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "opticlass/csv.hpp"
#include "opticlass/error.hpp"
#include "opticlass/forest.hpp"

namespace opticlass {

namespace {

using nlohmann::json;

void write_string(std::ostream& os, const std::string& s) { os << json(s).dump(); }

void write_hyperparams(std::ostream& os, const Hyperparams& h) {
  auto opt = [](const std::optional<std::size_t>& v) {
    return v ? std::to_string(*v) : std::string("null");
  };
  os << "{\"n_trees\":" << h.n_trees << ",\"max_depth\":" << opt(h.max_depth)
     << ",\"max_features\":" << opt(h.max_features)
     << ",\"min_samples_split\":" << h.min_samples_split
     << ",\"min_samples_leaf\":" << h.min_samples_leaf
     << ",\"bootstrap\":" << (h.bootstrap ? "true" : "false") << ",\"seed\":" << h.seed
     << ",\"voting\":\"" << (h.voting == Voting::Soft ? "soft" : "hard") << "\"}";
}

void write_tree(std::ostream& os, const DecisionTree& t) {
  os << "{\"nodes\":[";
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const auto& n = t.nodes[i];
    if (i) os << ',';
    if (n.is_leaf()) {
      os << "{\"type\":\"leaf\",\"counts\":[";
      const auto counts = t.leaf_counts(n);
      for (std::size_t c = 0; c < counts.size(); ++c) {
        if (c) os << ',';
        os << '[' << counts[c].label << ',' << counts[c].count << ']';
      }
      os << "]}";
    } else {
      os << "{\"type\":\"split\",\"feature\":" << n.feature
         << ",\"threshold\":" << csv::format_double(n.threshold) << ",\"left\":" << n.left
         << ",\"right\":" << n.right << '}';
    }
  }
  os << "]}";
}

void write_model(std::ostream& os, const ForestModel& m) {
  os << "{\"version\":" << kModelFormatVersion << ",\"hyperparams\":";
  write_hyperparams(os, m.hyperparams);
  os << ",\"label_table\":[";
  for (std::size_t i = 0; i < m.label_table.size(); ++i) {
    if (i) os << ',';
    write_string(os, m.label_table[i]);
  }
  os << "],\"feature_width\":" << m.feature_width << ",\"trees\":[";
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    if (t) os << ",\n";
    write_tree(os, m.trees[t]);
  }
  os << "]}\n";
}

[[noreturn]] void fail(const std::string& what) { throw ModelFormatError("model: " + what); }

const json& field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where + " lacks \"" + key + "\"");
  return *it;
}

std::uint64_t as_uint(const json& v, const std::string& where) {
  if (!v.is_number_unsigned()) fail(where + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::optional<std::size_t> as_opt_uint(const json& v, const std::string& where) {
  if (v.is_null()) return std::nullopt;
  return static_cast<std::size_t>(as_uint(v, where));
}

Hyperparams read_hyperparams(const json& j) {
  if (!j.is_object()) fail("hyperparams must be an object");
  Hyperparams h;
  h.n_trees = as_uint(field(j, "n_trees", "hyperparams"), "n_trees");
  h.max_depth = as_opt_uint(field(j, "max_depth", "hyperparams"), "max_depth");
  h.max_features = as_opt_uint(field(j, "max_features", "hyperparams"), "max_features");
  h.min_samples_split = as_uint(field(j, "min_samples_split", "hyperparams"), "min_samples_split");
  h.min_samples_leaf = as_uint(field(j, "min_samples_leaf", "hyperparams"), "min_samples_leaf");
  const json& bootstrap = field(j, "bootstrap", "hyperparams");
  if (!bootstrap.is_boolean()) fail("bootstrap must be a boolean");
  h.bootstrap = bootstrap.get<bool>();
  h.seed = as_uint(field(j, "seed", "hyperparams"), "seed");
  const json& voting = field(j, "voting", "hyperparams");
  if (voting == "soft") {
    h.voting = Voting::Soft;
  } else if (voting == "hard") {
    h.voting = Voting::Hard;
  } else {
    fail("voting must be \"soft\" or \"hard\"");
  }
  return h;
}

void read_node(const json& n, std::size_t i, const std::string& where, DecisionTree& t) {
  const std::string at = where + " node " + std::to_string(i);
  if (!n.is_object()) fail(at + " must be an object");
  const json& type = field(n, "type", at);
  TreeNode node;
  if (type == "split") {
    const auto feature = as_uint(field(n, "feature", at), at + " feature");
    const json& thr = field(n, "threshold", at);
    if (!thr.is_number() || !std::isfinite(thr.get<double>())) fail(at + " threshold");
    const auto left = as_uint(field(n, "left", at), at + " left");
    const auto right = as_uint(field(n, "right", at), at + " right");
    if (left <= i || right <= i || left == right || left > UINT32_MAX || right > UINT32_MAX) {
      fail(at + " has invalid child indices");
    }
    if (feature >= 3 * kMaxWindow) fail(at + " feature out of range");
    node.feature = static_cast<std::int32_t>(feature);
    node.threshold = thr.get<double>();
    node.left = static_cast<std::uint32_t>(left);
    node.right = static_cast<std::uint32_t>(right);
  } else if (type == "leaf") {
    const json& counts = field(n, "counts", at);
    if (!counts.is_array() || counts.empty()) fail(at + " has no counts");
    node.counts_begin = static_cast<std::uint32_t>(t.counts.size());
    for (const json& c : counts) {
      if (!c.is_array() || c.size() != 2) fail(at + " counts must be [label, count] pairs");
      const auto label = as_uint(c[0], at + " label");
      const auto count = as_uint(c[1], at + " count");
      if (count == 0 || count > UINT32_MAX || label > UINT32_MAX) fail(at + " bad count entry");
      if (t.counts.size() > node.counts_begin && t.counts.back().label >= label) {
        fail(at + " counts must be sorted by label");
      }
      t.counts.push_back({static_cast<LabelId>(label), static_cast<std::uint32_t>(count)});
    }
    node.counts_size = static_cast<std::uint32_t>(counts.size());
  } else {
    fail(at + " has unknown type");
  }
  t.nodes.push_back(node);
}

// Every non-root node must have exactly one parent and child indices must
// stay inside the node array.
void check_tree(const DecisionTree& t, const std::string& where) {
  if (t.nodes.empty()) fail(where + " has no nodes");
  std::vector<unsigned char> parents(t.nodes.size(), 0);
  for (const auto& n : t.nodes) {
    if (n.is_leaf()) continue;
    if (n.left >= t.nodes.size() || n.right >= t.nodes.size()) {
      fail(where + " has a child index past the node array");
    }
    ++parents[n.left];
    ++parents[n.right];
  }
  for (std::size_t i = 1; i < parents.size(); ++i) {
    if (parents[i] != 1) fail(where + " node " + std::to_string(i) + " is not a tree child");
  }
}

// Builds a json value from SAX events.
class DomBuilder {
 public:
  bool done() const noexcept { return done_; }
  json take() {
    done_ = false;
    return std::move(root_);
  }

  void value(json v) {
    insert(std::move(v));
    if (stack_.empty()) done_ = true;
  }
  void key(std::string k) { key_ = std::move(k); }
  void start(json container) { stack_.push_back(insert(std::move(container))); }
  void end() {
    stack_.pop_back();
    if (stack_.empty()) done_ = true;
  }
  std::size_t depth() const noexcept { return stack_.size(); }

 private:
  json* insert(json v) {
    if (stack_.empty()) {
      root_ = std::move(v);
      return &root_;
    }
    json& parent = *stack_.back();
    if (parent.is_array()) {
      parent.push_back(std::move(v));
      return &parent.back();
    }
    json& slot = parent[key_];
    slot = std::move(v);
    return &slot;
  }

  json root_;
  std::vector<json*> stack_;
  std::string key_;
  bool done_ = false;
};

// SAX consumer: the document header is built as a DOM; tree nodes are
// converted one at a time so large forests never exist as a DOM.
class ModelSax : public nlohmann::json_sax<json> {
 public:
  json document() { return doc_.take(); }
  std::vector<DecisionTree> trees() { return std::move(trees_); }

  bool null() override { return scalar(json(nullptr)); }
  bool boolean(bool v) override { return scalar(json(v)); }
  bool number_integer(number_integer_t v) override { return scalar(json(v)); }
  bool number_unsigned(number_unsigned_t v) override { return scalar(json(v)); }
  bool number_float(number_float_t v, const string_t&) override { return scalar(json(v)); }
  bool string(string_t& v) override { return scalar(json(v)); }
  bool binary(binary_t&) override { fail("binary values are not allowed"); }

  bool start_object(std::size_t) override {
    switch (mode_) {
      case Mode::Document:
        pending_trees_ = false;
        doc_.start(json::object());
        break;
      case Mode::Trees:
        tree_ = DecisionTree{};
        saw_nodes_ = false;
        mode_ = Mode::Tree;
        break;
      case Mode::Nodes:
        node_.start(json::object());
        mode_ = Mode::Node;
        break;
      case Mode::Node: node_.start(json::object()); break;
      case Mode::Tree: fail(where() + " must hold only \"nodes\"");
    }
    return true;
  }

  bool key(string_t& k) override {
    switch (mode_) {
      case Mode::Document:
        if (doc_.depth() == 1 && k == "trees") pending_trees_ = true;
        doc_.key(k);
        break;
      case Mode::Tree:
        if (k != "nodes" || saw_nodes_) fail(where() + " must hold exactly one \"nodes\" array");
        saw_nodes_ = true;
        expect_nodes_ = true;
        break;
      case Mode::Node: node_.key(k); break;
      default: fail("unexpected key");
    }
    return true;
  }

  bool end_object() override {
    switch (mode_) {
      case Mode::Document: doc_.end(); break;
      case Mode::Tree:
        if (!saw_nodes_) fail(where() + " has no nodes");
        check_tree(tree_, where());
        trees_.push_back(std::move(tree_));
        mode_ = Mode::Trees;
        break;
      case Mode::Node:
        node_.end();
        if (node_.done()) {
          read_node(node_.take(), tree_.nodes.size(), where(), tree_);
          mode_ = Mode::Nodes;
        }
        break;
      default: fail("unbalanced object");
    }
    return true;
  }

  bool start_array(std::size_t) override {
    if (mode_ == Mode::Document && pending_trees_ && doc_.depth() == 1) {
      pending_trees_ = false;
      doc_.value(json::array());
      mode_ = Mode::Trees;
      return true;
    }
    pending_trees_ = false;
    switch (mode_) {
      case Mode::Document: doc_.start(json::array()); break;
      case Mode::Tree:
        if (!expect_nodes_) fail(where() + " has a stray array");
        expect_nodes_ = false;
        mode_ = Mode::Nodes;
        break;
      case Mode::Node: node_.start(json::array()); break;
      default: fail("trees must hold tree objects");
    }
    return true;
  }

  bool end_array() override {
    switch (mode_) {
      case Mode::Document: doc_.end(); break;
      case Mode::Trees: mode_ = Mode::Document; break;
      case Mode::Nodes: mode_ = Mode::Tree; break;
      case Mode::Node: node_.end(); break;
      default: fail("unbalanced array");
    }
    return true;
  }

  bool parse_error(std::size_t position, const std::string&,
                   const nlohmann::detail::exception& e) override {
    fail("malformed JSON at byte " + std::to_string(position) + ": " + e.what());
  }

 private:
  enum class Mode { Document, Trees, Tree, Nodes, Node };

  bool scalar(json v) {
    pending_trees_ = false;
    switch (mode_) {
      case Mode::Document: doc_.value(std::move(v)); break;
      case Mode::Node: node_.value(std::move(v)); break;
      case Mode::Trees: fail("trees must hold tree objects");
      case Mode::Tree: fail(where() + " \"nodes\" must be an array");
      case Mode::Nodes: fail(where() + " node " + std::to_string(tree_.nodes.size()) + " must be an object");
    }
    return true;
  }

  std::string where() const { return "tree " + std::to_string(trees_.size()); }

  Mode mode_ = Mode::Document;
  DomBuilder doc_;
  DomBuilder node_;
  DecisionTree tree_;
  std::vector<DecisionTree> trees_;
  bool pending_trees_ = false;
  bool saw_nodes_ = false;
  bool expect_nodes_ = false;
};

}  // namespace

std::string save_model(const ForestModel& m) {
  std::ostringstream os;
  write_model(os, m);
  return std::move(os).str();
}

ForestModel load_model(std::string_view bytes) {
  if (bytes.empty()) fail("empty input");
  ModelSax sax;
  const bool ok = json::sax_parse(bytes.begin(), bytes.end(), &sax);
  if (!ok) fail("malformed JSON");
  json doc = sax.document();
  std::vector<DecisionTree> trees = sax.trees();
  if (!doc.is_object()) fail("top level must be an object");
  const json& version = field(doc, "version", "document");
  if (!version.is_number_integer() || version.get<long long>() != kModelFormatVersion) {
    fail("unsupported version " + version.dump() + " (expected " +
         std::to_string(kModelFormatVersion) + ")");
  }

  ForestModel m;
  m.hyperparams = read_hyperparams(field(doc, "hyperparams", "document"));
  const json& labels = field(doc, "label_table", "document");
  if (!labels.is_array() || labels.size() < 2) fail("label_table needs at least two labels");
  for (const json& l : labels) {
    if (!l.is_string() || l.get<std::string>().empty()) fail("labels must be non-empty strings");
    m.label_table.push_back(l.get<std::string>());
  }
  m.feature_width = as_uint(field(doc, "feature_width", "document"), "feature_width");
  if (m.feature_width < 1 || m.feature_width > kMaxWindow) fail("feature_width must be 1, 2 or 3");
  const json& tree_array = field(doc, "trees", "document");
  if (!tree_array.is_array()) fail("trees must be an array");
  if (!tree_array.empty()) fail("trees must hold tree objects");
  if (trees.empty()) fail("model has no trees");
  if (trees.size() != m.hyperparams.n_trees) fail("tree count does not match n_trees");

  for (std::size_t t = 0; t < trees.size(); ++t) {
    for (const auto& n : trees[t].nodes) {
      if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= m.num_features()) {
        fail("tree " + std::to_string(t) + " uses a feature beyond feature_width");
      }
    }
    for (const auto& c : trees[t].counts) {
      if (c.label >= m.label_table.size()) {
        fail("tree " + std::to_string(t) + " references an unknown label");
      }
    }
  }
  m.trees = std::move(trees);
  return m;
}

void save_model_file(const ForestModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_model(out, m);
  out.flush();
  if (!out) throw Error("failed writing " + path.string());
}

ForestModel load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFormatError("cannot open model " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_model(buf.str());
}

}  // namespace opticlass
