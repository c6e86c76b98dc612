#pragma once

// Reviewer-paper assignment.
//
// Objective: maximize the summed combined similarity of assigned pairs.
// Hard constraints: every paper gets `min_reviewers`, no reviewer exceeds
// `max_papers_per_reviewer`, at most `max_author_reviewers` reviewers tagged
// `author_tag` per paper, no conflicted pair, no duplicate pair.
//
// Construction is greedy by similarity; papers the greedy pass leaves short
// are completed along augmenting paths of the residual flow network
//   source -> reviewer (load) -> [author gate] -> paper (demand) -> sink,
// so a feasible instance is never reported short. A replace/swap local search
// then climbs until no strictly improving move remains.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "revcal/common.hpp"
#include "revcal/csv.hpp"

namespace revcal {

struct SimilaritySources {
  double bid = 0.0;
  double subject = 0.0;
  std::optional<double> tpms;  // matching-service score, often missing
};

struct SimilarityWeights {
  double bid = 0.2;
  double tpms = 0.3;
  double subject = 0.5;
};

/// Convex combination of the sources; a missing matching-service score has
/// its weight spread proportionally over the other two.
inline double combined_similarity(const SimilaritySources& src,
                                  const SimilarityWeights& w = {}) {
  if (w.bid < 0.0 || w.tpms < 0.0 || w.subject < 0.0) {
    throw Error("similarity weights must be non-negative");
  }
  if (std::abs(w.bid + w.tpms + w.subject - 1.0) > 1e-9) {
    throw Error("similarity weights must sum to 1");
  }
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(src.bid) || !in_unit(src.subject) ||
      (src.tpms && !in_unit(*src.tpms))) {
    throw Error("similarity sources must lie in [0, 1]");
  }
  if (src.tpms) {
    return w.bid * src.bid + w.tpms * *src.tpms + w.subject * src.subject;
  }
  const double rest = w.bid + w.subject;
  if (rest == 0.0) return 0.0;
  return (w.bid * src.bid + w.subject * src.subject) / rest;
}

struct Candidate {
  ReviewerId reviewer;
  PaperId paper;
  SimilaritySources sources;
};

struct AssignmentConstraints {
  std::size_t min_reviewers = 4;
  std::size_t max_papers_per_reviewer = 8;
  std::size_t max_author_reviewers = 1;
  std::string author_tag = "Rev2";
  std::set<std::pair<ReviewerId, PaperId>> conflicts;

  void check() const {
    if (min_reviewers < 1) throw Error("min reviewers per paper must be >= 1");
  }
};

struct AssignmentProblem {
  std::vector<PaperId> papers;
  std::vector<ReviewerId> reviewers;
  std::vector<Candidate> candidates;  // pairs without a row are ineligible
  std::map<ReviewerId, std::string> tags;
  SimilarityWeights weights;
};

struct AssignedPair {
  ReviewerId reviewer;
  PaperId paper;
  double similarity = 0.0;
};

namespace constraint {
inline constexpr std::string_view kMinReviewers = "min reviewers";
inline constexpr std::string_view kLoad = "reviewer load";
inline constexpr std::string_view kLoneWolf = "lone-wolf mitigation";
inline constexpr std::string_view kConflict = "conflict";
inline constexpr std::string_view kDuplicate = "duplicate pair";
inline constexpr std::string_view kEligible = "eligible reviewers";
inline constexpr std::string_view kCapacity = "reviewer capacity";
}  // namespace constraint

struct ConstraintCheck {
  std::string name;
  bool pass = true;
  std::vector<std::pair<std::string, std::string>> violations;  // (reviewer, paper)
};

struct ConstraintReport {
  std::vector<ConstraintCheck> checks;

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const ConstraintCheck& c) { return c.pass; });
  }
  const ConstraintCheck& get(std::string_view name) const {
    for (const auto& c : checks) {
      if (c.name == name) return c;
    }
    throw Error("no constraint named " + std::string(name));
  }
};

struct Shortfall {
  PaperId paper;
  std::size_t missing = 0;
  std::string binding;  // constraint that prevents completion
};

struct AssignmentResult {
  std::vector<AssignedPair> pairs;
  double total_similarity = 0.0;
  double construction_total = 0.0;  // before local search
  std::size_t improving_moves = 0;
  bool feasible = true;
  std::vector<Shortfall> shortfalls;
  ConstraintReport report;
};

/// Audits an assignment against every hard constraint.
inline ConstraintReport check_constraints(
    std::span<const AssignedPair> pairs, std::span<const PaperId> papers,
    const std::map<ReviewerId, std::string>& tags,
    const AssignmentConstraints& cons) {
  ConstraintCheck min_check{std::string(constraint::kMinReviewers)};
  ConstraintCheck load_check{std::string(constraint::kLoad)};
  ConstraintCheck wolf_check{std::string(constraint::kLoneWolf)};
  ConstraintCheck conflict_check{std::string(constraint::kConflict)};
  ConstraintCheck dup_check{std::string(constraint::kDuplicate)};

  std::map<PaperId, std::vector<ReviewerId>> by_paper;
  std::map<ReviewerId, std::size_t> load;
  std::set<std::pair<ReviewerId, PaperId>> seen;
  for (const auto& p : papers) by_paper[p];
  for (const auto& a : pairs) {
    by_paper[a.paper].push_back(a.reviewer);
    ++load[a.reviewer];
    if (!seen.emplace(a.reviewer, a.paper).second) {
      dup_check.violations.emplace_back(a.reviewer.value, a.paper.value);
    }
    if (cons.conflicts.count({a.reviewer, a.paper})) {
      conflict_check.violations.emplace_back(a.reviewer.value, a.paper.value);
    }
  }
  for (const auto& [paper, revs] : by_paper) {
    if (revs.size() < cons.min_reviewers) {
      min_check.violations.emplace_back("", paper.value);
    }
    std::vector<ReviewerId> authors;
    for (const auto& r : revs) {
      auto it = tags.find(r);
      if (it != tags.end() && it->second == cons.author_tag) authors.push_back(r);
    }
    if (authors.size() > cons.max_author_reviewers) {
      for (const auto& r : authors) {
        wolf_check.violations.emplace_back(r.value, paper.value);
      }
    }
  }
  for (const auto& [r, n] : load) {
    if (n > cons.max_papers_per_reviewer) {
      load_check.violations.emplace_back(r.value, "");
    }
  }
  ConstraintReport rep;
  for (auto* c : {&min_check, &load_check, &wolf_check, &conflict_check,
                  &dup_check}) {
    c->pass = c->violations.empty();
    rep.checks.push_back(std::move(*c));
  }
  return rep;
}

namespace detail {

/// Index-based working state shared by the construction and search phases.
class AssignmentState {
 public:
  AssignmentState(const AssignmentProblem& prob,
                  const AssignmentConstraints& cons)
      : prob_(prob), cons_(cons) {
    std::map<PaperId, std::size_t> pidx;
    std::map<ReviewerId, std::size_t> ridx;
    for (std::size_t i = 0; i < prob.papers.size(); ++i) {
      if (!pidx.emplace(prob.papers[i], i).second) {
        throw Error("duplicate paper id '" + prob.papers[i].value + "'");
      }
    }
    for (std::size_t i = 0; i < prob.reviewers.size(); ++i) {
      if (!ridx.emplace(prob.reviewers[i], i).second) {
        throw Error("duplicate reviewer id '" + prob.reviewers[i].value + "'");
      }
    }
    author_.assign(prob.reviewers.size(), false);
    for (std::size_t r = 0; r < prob.reviewers.size(); ++r) {
      auto it = prob.tags.find(prob.reviewers[r]);
      author_[r] = it != prob.tags.end() && it->second == cons.author_tag;
    }
    eligible_.resize(prob.papers.size());
    for (const auto& c : prob.candidates) {
      auto p = pidx.find(c.paper);
      auto r = ridx.find(c.reviewer);
      if (p == pidx.end() || r == ridx.end()) {
        throw Error("candidate (" + c.reviewer.value + ", " + c.paper.value +
                    ") refers to an unknown paper or reviewer");
      }
      if (cons.conflicts.count({c.reviewer, c.paper})) continue;
      const double s = combined_similarity(c.sources, prob.weights);
      auto [it, inserted] = eligible_[p->second].emplace(r->second, s);
      if (!inserted) {
        throw Error("duplicate candidate row (" + c.reviewer.value + ", " +
                    c.paper.value + ")");
      }
    }
    assigned_.resize(prob.papers.size());
    authors_on_.assign(prob.papers.size(), 0);
    load_.assign(prob.reviewers.size(), 0);
  }

  std::size_t papers() const { return prob_.papers.size(); }
  std::size_t reviewers() const { return prob_.reviewers.size(); }
  bool author(std::size_t r) const { return author_[r]; }
  std::size_t load(std::size_t r) const { return load_[r]; }
  std::size_t authors_on(std::size_t p) const { return authors_on_[p]; }
  const std::map<std::size_t, double>& eligible(std::size_t p) const {
    return eligible_[p];
  }
  const std::set<std::size_t>& assigned(std::size_t p) const {
    return assigned_[p];
  }
  std::optional<double> similarity(std::size_t r, std::size_t p) const {
    auto it = eligible_[p].find(r);
    if (it == eligible_[p].end()) return std::nullopt;
    return it->second;
  }
  std::size_t deficit(std::size_t p) const {
    const auto have = assigned_[p].size();
    return have >= cons_.min_reviewers ? 0 : cons_.min_reviewers - have;
  }
  bool has_capacity(std::size_t r) const {
    return load_[r] < cons_.max_papers_per_reviewer;
  }
  bool gate_open(std::size_t p) const {
    return authors_on_[p] < cons_.max_author_reviewers;
  }

  void add(std::size_t r, std::size_t p) {
    assigned_[p].insert(r);
    ++load_[r];
    if (author_[r]) ++authors_on_[p];
  }
  void remove(std::size_t r, std::size_t p) {
    assigned_[p].erase(r);
    --load_[r];
    if (author_[r]) --authors_on_[p];
  }

  double total() const {
    double t = 0.0;
    for (std::size_t p = 0; p < papers(); ++p) {
      for (std::size_t r : assigned_[p]) t += eligible_[p].at(r);
    }
    return t;
  }

  std::vector<AssignedPair> pairs() const {
    std::vector<AssignedPair> out;
    for (std::size_t p = 0; p < papers(); ++p) {
      for (std::size_t r : assigned_[p]) {
        out.push_back(
            {prob_.reviewers[r], prob_.papers[p], eligible_[p].at(r)});
      }
    }
    return out;
  }

  const AssignmentProblem& problem() const { return prob_; }
  const AssignmentConstraints& constraints() const { return cons_; }

 private:
  const AssignmentProblem& prob_;
  const AssignmentConstraints& cons_;
  std::vector<bool> author_;
  std::vector<std::map<std::size_t, double>> eligible_;
  std::vector<std::set<std::size_t>> assigned_;
  std::vector<std::size_t> authors_on_;
  std::vector<std::size_t> load_;
};

inline void greedy_fill(AssignmentState& st) {
  struct Edge {
    double sim;
    std::size_t p;
    std::size_t r;
  };
  std::vector<Edge> edges;
  for (std::size_t p = 0; p < st.papers(); ++p) {
    for (const auto& [r, s] : st.eligible(p)) edges.push_back({s, p, r});
  }
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    if (a.p != b.p) return a.p < b.p;
    return a.r < b.r;
  });
  for (const auto& e : edges) {
    if (st.deficit(e.p) == 0 || !st.has_capacity(e.r)) continue;
    if (st.assigned(e.p).count(e.r)) continue;
    if (st.author(e.r) && !st.gate_open(e.p)) continue;
    st.add(e.r, e.p);
  }
}

/// One augmenting path in the residual network ending at a paper with a
/// deficit. Returns false when none exists.
inline bool augment(AssignmentState& st) {
  // node ids: reviewers [0, R), papers [R, R+P), author gates [R+P, R+2P)
  const std::size_t R = st.reviewers();
  const std::size_t P = st.papers();
  const std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> parent(R + 2 * P, none);
  std::vector<bool> seen(R + 2 * P, false);
  std::deque<std::size_t> queue;
  for (std::size_t r = 0; r < R; ++r) {
    if (st.has_capacity(r)) {
      seen[r] = true;
      queue.push_back(r);
    }
  }
  // reviewer -> papers it may newly cover; built lazily per reviewer
  std::vector<std::vector<std::size_t>> cover(R);
  for (std::size_t p = 0; p < P; ++p) {
    for (const auto& [r, s] : st.eligible(p)) {
      if (!st.assigned(p).count(r)) cover[r].push_back(p);
    }
  }
  auto visit = [&](std::size_t node, std::size_t from) {
    if (seen[node]) return;
    seen[node] = true;
    parent[node] = from;
    queue.push_back(node);
  };

  std::size_t target = none;
  while (!queue.empty() && target == none) {
    const std::size_t u = queue.front();
    queue.pop_front();
    if (u < R) {
      for (std::size_t p : cover[u]) {
        visit(st.author(u) ? R + P + p : R + p, u);
      }
    } else if (u < R + P) {
      const std::size_t p = u - R;
      if (st.deficit(p) > 0) {
        target = u;
        break;
      }
      // undo a non-author assignment, or reopen the gate
      for (std::size_t r : st.assigned(p)) {
        if (!st.author(r)) visit(r, u);
      }
      if (st.authors_on(p) > 0) visit(R + P + p, u);
    } else {
      const std::size_t p = u - R - P;
      if (st.gate_open(p)) visit(R + p, u);
      for (std::size_t r : st.assigned(p)) {
        if (st.author(r)) visit(r, u);
      }
    }
  }
  if (target == none) return false;

  // walk back and flip edges
  std::size_t v = target;
  while (parent[v] != none) {
    const std::size_t u = parent[v];
    if (u < R) {
      const std::size_t p = v >= R + P ? v - R - P : v - R;
      st.add(u, p);
    } else if (v < R) {
      const std::size_t p = u >= R + P ? u - R - P : u - R;
      st.remove(v, p);
    }
    // paper <-> gate moves carry no assignment of their own
    v = u;
  }
  return true;
}

/// Replace and swap moves; returns the number of improving moves applied.
inline std::size_t local_search(AssignmentState& st, std::size_t max_passes) {
  constexpr double kEps = 1e-12;
  const auto& cons = st.constraints();
  std::size_t moves = 0;
  for (std::size_t pass = 0; pass < max_passes; ++pass) {
    bool improved = false;
    // replace (r, p) by an unassigned eligible r2 with spare load
    for (std::size_t p = 0; p < st.papers(); ++p) {
      std::vector<std::size_t> current(st.assigned(p).begin(),
                                       st.assigned(p).end());
      for (std::size_t r : current) {
        const double base = *st.similarity(r, p);
        std::size_t best = r;
        double best_sim = base;
        for (const auto& [r2, s2] : st.eligible(p)) {
          if (s2 <= best_sim + kEps || st.assigned(p).count(r2)) continue;
          if (!st.has_capacity(r2)) continue;
          if (st.author(r2) && !st.author(r) &&
              st.authors_on(p) >= cons.max_author_reviewers) {
            continue;
          }
          best = r2;
          best_sim = s2;
        }
        if (best != r) {
          st.remove(r, p);
          st.add(best, p);
          ++moves;
          improved = true;
        }
      }
    }
    // swap reviewers between two papers
    for (std::size_t p1 = 0; p1 < st.papers(); ++p1) {
      for (std::size_t p2 = p1 + 1; p2 < st.papers(); ++p2) {
        bool again = true;
        while (again) {
          again = false;
          std::vector<std::size_t> a1(st.assigned(p1).begin(),
                                      st.assigned(p1).end());
          std::vector<std::size_t> a2(st.assigned(p2).begin(),
                                      st.assigned(p2).end());
          for (std::size_t r1 : a1) {
            if (again) break;
            for (std::size_t r2 : a2) {
              if (r1 == r2) continue;
              if (st.assigned(p1).count(r2) || st.assigned(p2).count(r1)) {
                continue;
              }
              const auto s21 = st.similarity(r2, p1);
              const auto s12 = st.similarity(r1, p2);
              if (!s21 || !s12) continue;
              const double gain = *s21 + *s12 - *st.similarity(r1, p1) -
                                  *st.similarity(r2, p2);
              if (gain <= kEps) continue;
              const auto a = static_cast<long>(st.author(r1));
              const auto b = static_cast<long>(st.author(r2));
              const auto lim = static_cast<long>(cons.max_author_reviewers);
              if (static_cast<long>(st.authors_on(p1)) - a + b > lim) continue;
              if (static_cast<long>(st.authors_on(p2)) - b + a > lim) continue;
              st.remove(r1, p1);
              st.remove(r2, p2);
              st.add(r2, p1);
              st.add(r1, p2);
              ++moves;
              improved = true;
              again = true;
              break;
            }
          }
        }
      }
    }
    if (!improved) break;
  }
  return moves;
}

inline std::vector<Shortfall> shortfalls(const AssignmentState& st) {
  const auto& cons = st.constraints();
  std::vector<Shortfall> out;
  for (std::size_t p = 0; p < st.papers(); ++p) {
    const std::size_t missing = st.deficit(p);
    if (missing == 0) continue;
    std::size_t plain = 0;
    std::size_t authors = 0;
    for (const auto& [r, s] : st.eligible(p)) (st.author(r) ? authors : plain)++;
    std::string binding;
    if (plain + authors < cons.min_reviewers) {
      binding = constraint::kEligible;
    } else if (plain + std::min(authors, cons.max_author_reviewers) <
               cons.min_reviewers) {
      binding = constraint::kLoneWolf;
    } else {
      binding = constraint::kCapacity;
    }
    out.push_back({st.problem().papers[p], missing, binding});
  }
  return out;
}

enum class Phase { kConstruction, kFull };

inline AssignmentResult run_assignment(const AssignmentProblem& prob,
                                       const AssignmentConstraints& cons,
                                       Phase phase, std::size_t max_passes) {
  cons.check();
  AssignmentState st(prob, cons);
  greedy_fill(st);
  while (augment(st)) {
  }
  AssignmentResult res;
  res.construction_total = st.total();
  if (phase == Phase::kFull) res.improving_moves = local_search(st, max_passes);
  res.pairs = st.pairs();
  res.total_similarity = st.total();
  res.shortfalls = shortfalls(st);
  const std::size_t demand = cons.min_reviewers * prob.papers.size();
  const std::size_t capacity =
      cons.max_papers_per_reviewer * prob.reviewers.size();
  res.feasible = res.shortfalls.empty();
  if (capacity < demand && res.shortfalls.empty()) {
    // unreachable: total flow cannot exceed capacity
    throw Error("assignment exceeded reviewer capacity");
  }
  res.report = check_constraints(res.pairs, prob.papers, prob.tags, cons);
  return res;
}

}  // namespace detail

/// Greedy construction plus shortfall repair, without local search.
inline AssignmentResult greedy_assign(const AssignmentProblem& prob,
                                      const AssignmentConstraints& cons) {
  return detail::run_assignment(prob, cons, detail::Phase::kConstruction, 0);
}

inline AssignmentResult assign(const AssignmentProblem& prob,
                               const AssignmentConstraints& cons,
                               std::size_t max_passes = 1000) {
  return detail::run_assignment(prob, cons, detail::Phase::kFull, max_passes);
}

// ---- files -----------------------------------------------------------------

/// `reviewer_id,paper_id,bid,subject_relevance,tpms` with tpms possibly empty.
/// Papers and reviewers are taken from the rows, in first-seen order.
inline AssignmentProblem load_similarity_csv(const std::filesystem::path& path) {
  auto rows = csv::parse(csv::read_file(path));
  if (rows.empty()) throw Error(path.string() + ": missing header");
  const std::vector<std::string> expected = {"reviewer_id", "paper_id", "bid",
                                             "subject_relevance", "tpms"};
  std::vector<std::string> got;
  for (const auto& h : rows.front().fields) got.push_back(to_lower(trim(h)));
  if (got != expected) {
    throw Error(path.string() +
                ": expected header reviewer_id,paper_id,bid,subject_relevance,tpms");
  }
  AssignmentProblem prob;
  std::set<PaperId> papers;
  std::set<ReviewerId> reviewers;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    const std::string where = path.string() + ":" + std::to_string(rows[i].line);
    if (f.size() != 5) throw Error(where + ": wrong field count");
    Candidate c;
    c.reviewer = ReviewerId(std::string(trim(f[0])));
    c.paper = PaperId(std::string(trim(f[1])));
    if (c.reviewer.empty() || c.paper.empty()) {
      throw Error(where + ": empty identifier");
    }
    c.sources.bid = parse_double(f[2], "bid");
    c.sources.subject = parse_double(f[3], "subject_relevance");
    if (!trim(f[4]).empty()) c.sources.tpms = parse_double(f[4], "tpms");
    if (papers.insert(c.paper).second) prob.papers.push_back(c.paper);
    if (reviewers.insert(c.reviewer).second) prob.reviewers.push_back(c.reviewer);
    prob.candidates.push_back(std::move(c));
  }
  return prob;
}

inline std::string to_csv(const AssignmentResult& res) {
  std::string out;
  csv::write_row(out, {"reviewer_id", "paper_id", "similarity"});
  for (const auto& a : res.pairs) {
    csv::write_row(out, {a.reviewer.value, a.paper.value,
                         format_double(a.similarity)});
  }
  return out;
}

inline nlohmann::json to_json(const ConstraintReport& rep) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : rep.checks) {
    nlohmann::json v = nlohmann::json::array();
    for (const auto& [r, p] : c.violations) {
      v.push_back({{"reviewer_id", r}, {"paper_id", p}});
    }
    checks.push_back({{"constraint", c.name}, {"pass", c.pass}, {"violations", v}});
  }
  return checks;
}

inline nlohmann::json to_json(const AssignmentResult& res) {
  nlohmann::json short_list = nlohmann::json::array();
  for (const auto& s : res.shortfalls) {
    short_list.push_back({{"paper_id", s.paper.value},
                          {"missing", s.missing},
                          {"binding_constraint", s.binding}});
  }
  return {{"pairs", res.pairs.size()},
          {"total_similarity", res.total_similarity},
          {"construction_total", res.construction_total},
          {"improving_moves", res.improving_moves},
          {"feasible", res.feasible},
          {"shortfalls", short_list},
          {"constraints", to_json(res.report)}};
}

}  // namespace revcal
