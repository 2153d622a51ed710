#include "chatact/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "chatact/error.hpp"
#include "chatact/taxonomy.hpp"
#include "chatact/util.hpp"

namespace chatact {
namespace {

const std::vector<std::string> kStates = {
    "Inform", "Query", "Request", "Assign", "Propose", "Acknowledge", "Reject", "Code", "Social",
    "Inform-InResponse", "Inform-NewIssue", "Query-For-Clarification", "Propose-OfferAssistance",
    "Acknowledge-Accept", "Social-Comradery", "Social-Appreciation", "Social-Frustration", "Social-Blame-Person"};

// Sparse transition weights; every row also gets a small floor so the chain
// is ergodic.
const std::map<std::string, std::map<std::string, double>> kFlow = {
    {"Inform", {{"Inform", .30}, {"Query", .15}, {"Inform-NewIssue", .08}, {"Propose", .06}, {"Request", .06},
                {"Assign", .05}, {"Acknowledge", .08}, {"Code", .05}, {"Social", .04}, {"Social-Comradery", .03},
                {"Social-Frustration", .03}, {"Social-Appreciation", .02}}},
    {"Query", {{"Inform-InResponse", .55}, {"Query-For-Clarification", .12}, {"Inform", .08}, {"Acknowledge", .05},
               {"Reject", .03}, {"Code", .05}}},
    {"Request", {{"Acknowledge-Accept", .35}, {"Acknowledge", .20}, {"Reject", .08}, {"Propose-OfferAssistance", .10},
                 {"Query-For-Clarification", .10}, {"Inform-InResponse", .05}}},
    {"Assign", {{"Acknowledge-Accept", .55}, {"Reject", .15}, {"Query-For-Clarification", .10}, {"Acknowledge", .10}}},
    {"Propose", {{"Acknowledge", .30}, {"Acknowledge-Accept", .20}, {"Reject", .15}, {"Query", .15},
                 {"Social-Appreciation", .05}}},
    {"Acknowledge", {{"Inform", .30}, {"Query", .15}, {"Social", .10}, {"Propose", .08}, {"Social-Comradery", .05},
                     {"Assign", .05}}},
    {"Reject", {{"Inform", .25}, {"Propose", .20}, {"Query", .10}, {"Assign", .10}, {"Social-Frustration", .05}}},
    {"Code", {{"Inform", .25}, {"Query", .30}, {"Inform-NewIssue", .10}, {"Social-Frustration", .10}, {"Request", .10}}},
    {"Social", {{"Social", .20}, {"Social-Comradery", .20}, {"Inform", .20}, {"Query", .10}}},
    {"Inform-InResponse", {{"Social-Appreciation", .25}, {"Acknowledge", .20}, {"Query", .15}, {"Inform", .15},
                           {"Inform-InResponse", .10}}},
    {"Inform-NewIssue", {{"Query", .25}, {"Assign", .20}, {"Social-Frustration", .15}, {"Social-Blame-Person", .08},
                         {"Propose", .10}, {"Propose-OfferAssistance", .10}}},
    {"Query-For-Clarification", {{"Inform-InResponse", .60}, {"Inform", .15}}},
    {"Propose-OfferAssistance", {{"Acknowledge-Accept", .40}, {"Social-Appreciation", .30}, {"Acknowledge", .10}}},
    {"Acknowledge-Accept", {{"Inform", .30}, {"Social-Appreciation", .10}, {"Query", .15}, {"Assign", .10},
                            {"Social-Comradery", .05}}},
    {"Social-Comradery", {{"Social-Comradery", .25}, {"Social", .20}, {"Inform", .20}, {"Social-Appreciation", .10}}},
    {"Social-Appreciation", {{"Social", .20}, {"Social-Comradery", .20}, {"Inform", .30}, {"Query", .10}}},
    {"Social-Frustration", {{"Social-Blame-Person", .15}, {"Social", .15}, {"Social-Comradery", .10},
                            {"Propose-OfferAssistance", .20}, {"Inform", .20}}},
    {"Social-Blame-Person", {{"Reject", .20}, {"Social-Frustration", .20}, {"Social", .10}, {"Inform", .20}}},
};
constexpr double kFloor = 0.005;

// Fine-grained gold labels emitted for each state.
const std::map<std::string, std::vector<std::string>> kLeaves = {
    {"Inform", {"Inform-Status-Personal", "Inform-Status-Environment", "Inform-Status-TaskOrIssue-Progress",
                "Inform-Technical", "Inform-Admin", "Inform-ExplainRationale", "Inform-ClaimTask"}},
    {"Query", {"Query-Status-TaskOrIssue", "Query-Technical", "Query-Admin", "Query-Through-Uncertainty"}},
    {"Request", {"Request-Help", "Request-Attention"}},
    {"Assign", {"Assign-Task", "Assign-Admin"}},
    {"Propose", {"Propose-Task", "Propose-PossibleSolution", "Propose-Admin"}},
    {"Acknowledge", {"Acknowledge-Receipt", "Acknowledge-Affirm", "Acknowledge-Validated"}},
    {"Reject", {"Reject", "Reject-Counter"}},
    {"Code", {"Code-Message-Table-Issue", "Code-Message-Table-Solution"}},
    {"Social", {"Social-Backchannel", "Social"}},
    {"Inform-NewIssue", {"Inform-NewIssue", "Inform-NewIssue-Anticipated"}},
};

// States whose sentence opens a new message from a different speaker.
bool is_response(const std::string& s) {
  static const std::vector<std::string> r = {"Inform-InResponse", "Acknowledge",         "Acknowledge-Accept",
                                             "Reject",            "Query-For-Clarification", "Social-Appreciation",
                                             "Propose-OfferAssistance"};
  return std::find(r.begin(), r.end(), s) != r.end();
}

const std::vector<std::string> kThings = {"build",   "deploy script", "login page", "test suite", "database",
                                          "api",     "release branch", "docs",      "dashboard", "parser",
                                          "cache",   "ci pipeline",   "installer",  "schema",    "benchmark"};
const std::vector<std::string> kStatesOf = {"broken", "green", "slow", "done", "flaky", "merged", "ready", "stale"};
const std::vector<std::string> kPeople = {"Ana", "Ben", "Chen", "Dara", "Eli", "Fay"};

// Phrase pools shared between labels. {t} is a thing, {s} a state, {p} a person.
const std::map<std::string, std::vector<std::string>> kPools = {
    {"yes", {"ok", "sure", "sounds good", "yes", "got it", "alright", "yep"}},
    {"statement", {"the {t} is {s}", "the {t} looks {s}", "{t} is {s} now"}},
    {"ask", {"can you look at the {t}", "could you check the {t}", "please handle the {t}"}},
    {"chat", {"haha", "nice", "lol", "heh nice"}},
    {"gripe", {"ugh the {t} again", "the {t} broke again", "not the {t} again"}},
};

// Which pool each state may borrow from, and a suffix mark for ambiguous
// draws ("?" keeps queries tellable from statements only by punctuation).
const std::map<std::string, std::pair<std::string, std::string>> kAmbiguous = {
    {"Inform", {"statement", "."}},
    {"Inform-InResponse", {"yes", ""}},
    {"Inform-NewIssue", {"statement", "."}},
    {"Query", {"statement", "?"}},
    {"Query-For-Clarification", {"statement", "?"}},
    {"Acknowledge", {"yes", ""}},
    {"Acknowledge-Accept", {"yes", ""}},
    {"Request", {"ask", "?"}},
    {"Assign", {"ask", "."}},
    {"Social", {"chat", ""}},
    {"Social-Comradery", {"chat", "!"}},
    {"Social-Frustration", {"gripe", ""}},
    {"Social-Blame-Person", {"gripe", "."}},
};

// Label-specific templates.
const std::map<std::string, std::vector<std::string>> kSignature = {
    {"Inform", {"I pushed the {t} changes.", "FYI the {t} moved to the new host.", "I'm working on the {t}.",
                "The {t} config lives in the repo now."}},
    {"Query", {"Why is the {t} {s}?", "Where do we keep the {t}?", "How does the {t} get deployed?",
               "Who owns the {t}?"}},
    {"Request", {"Can someone help me with the {t}?", "Could somebody take a look at the {t} please?",
                 "I need help with the {t}."}},
    {"Assign", {"{p}, please take the {t}.", "{p} will own the {t} this week.", "{p}, you're on the {t}."}},
    {"Propose", {"Maybe we should rewrite the {t}.", "What if we split the {t} in two?",
                 "I suggest we drop the {t}."}},
    {"Acknowledge", {"Noted.", "Makes sense.", "I see.", "Understood."}},
    {"Reject", {"No, I don't think so.", "I disagree, the {t} is fine.", "That won't work for the {t}."}},
    {"Code", {"```\nmake {t}\n```", "```\ngit log --oneline {t}\n```", "```\nassert({t} != null)\n```"}},
    {"Social", {"good morning all", "back from lunch", "happy friday", "brb"}},
    {"Inform-InResponse", {"It is in the {t} folder.", "Yes, the {t} is {s}.", "Because the {t} was {s}.",
                           "{p} owns the {t}."}},
    {"Inform-NewIssue", {"Heads up, the {t} is failing.", "Found a bug in the {t}.",
                         "The {t} throws an error on startup."}},
    {"Query-For-Clarification", {"Do you mean the {t}?", "Which {t} do you mean?", "Sorry, what do you mean by {t}?"}},
    {"Propose-OfferAssistance", {"I can help with the {t}.", "Want me to take a look at the {t}?",
                                 "Happy to pair on the {t}."}},
    {"Acknowledge-Accept", {"Will do.", "On it.", "I'll take care of it.", "Sure, I can do that."}},
    {"Social-Comradery", {"Great teamwork everyone!", "We make a good team!", "Go team!"}},
    {"Social-Appreciation", {"Thanks!", "Thank you so much.", "Thanks, that helps."}},
    {"Social-Frustration", {"This is so annoying.", "I'm tired of the {t}.", "Argh."}},
    {"Social-Blame-Person", {"{p} broke the {t}.", "That was {p}'s change.", "{p} forgot to test the {t}."}},
};

std::string fill(std::string tpl, Rng& rng) {
  auto sub = [&](const std::string& key, const std::vector<std::string>& options) {
    for (std::size_t at; (at = tpl.find(key)) != std::string::npos;) {
      tpl.replace(at, key.size(), options[rng.below(options.size())]);
    }
  };
  sub("{t}", kThings);
  sub("{s}", kStatesOf);
  sub("{p}", kPeople);
  return tpl;
}

std::vector<std::vector<double>> build_transitions() {
  std::vector<std::vector<double>> t(kStates.size(), std::vector<double>(kStates.size(), kFloor));
  for (std::size_t i = 0; i < kStates.size(); ++i) {
    for (const auto& [to, w] : kFlow.at(kStates[i])) {
      const auto j = static_cast<std::size_t>(std::find(kStates.begin(), kStates.end(), to) - kStates.begin());
      t[i][j] += w;
    }
    double sum = 0.0;
    for (double v : t[i]) sum += v;
    for (double& v : t[i]) v /= sum;
  }
  return t;
}

std::vector<double> stationary(const std::vector<std::vector<double>>& t) {
  std::vector<double> p(t.size(), 1.0 / static_cast<double>(t.size())), next(t.size());
  for (int iter = 0; iter < 10000; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (std::size_t j = 0; j < t.size(); ++j) next[j] += p[i] * t[i][j];
    }
    double diff = 0.0;
    for (std::size_t j = 0; j < t.size(); ++j) diff = std::max(diff, std::abs(next[j] - p[j]));
    p.swap(next);
    if (diff < 1e-15) break;
  }
  return p;
}

std::string sentence_text(const std::string& state, Rng& rng, double ambiguity) {
  const auto amb = kAmbiguous.find(state);
  if (amb != kAmbiguous.end() && rng.uniform() < ambiguity) {
    const auto& pool = kPools.at(amb->second.first);
    return fill(pool[rng.below(pool.size())], rng) + amb->second.second;
  }
  const auto& sig = kSignature.at(state);
  return fill(sig[rng.below(sig.size())], rng);
}

}  // namespace

SyntheticCorpus generate_corpus(const SyntheticConfig& config, const Taxonomy& taxonomy) {
  if (config.dialogue_sentences == 0) throw DataError("dialogue_sentences must be positive");
  for (const auto& s : kStates) {
    if (!taxonomy.in_reduced_set(s)) throw DataError("taxonomy reduced set lacks '" + s + "'");
    const auto leaves = kLeaves.find(s);
    if (leaves == kLeaves.end()) continue;
    for (const auto& leaf : leaves->second) {
      if (!taxonomy.contains(leaf) || taxonomy.collapse(leaf) != s) {
        throw DataError("taxonomy does not collapse '" + leaf + "' to '" + s + "'");
      }
    }
  }

  SyntheticCorpus corpus;
  corpus.states = kStates;
  corpus.transitions = build_transitions();
  corpus.initial = stationary(corpus.transitions);

  Rng rng(config.seed);
  const std::size_t speakers = kPeople.size();
  const Timestamp epoch = parse_timestamp("2021-03-01T09:00:00Z");
  std::size_t produced = 0;
  for (std::size_t d = 0; produced < config.sentences; ++d) {
    const std::size_t length = std::min(config.dialogue_sentences, config.sentences - produced);
    const std::string dialogue_id = "synth-" + std::to_string(d);
    Timestamp clock = epoch + std::chrono::hours(24 * 7 * static_cast<std::int64_t>(d));

    struct Pending {
      std::string speaker;
      Timestamp ts;
      std::vector<std::string> texts;
      std::vector<std::string> labels;
    };
    std::vector<Pending> messages;
    std::size_t state = rng.categorical(corpus.initial);
    std::size_t speaker = rng.below(speakers);
    for (std::size_t i = 0; i < length; ++i) {
      if (i > 0) state = rng.categorical(corpus.transitions[state]);
      const std::string& name = kStates[state];
      const bool code = name == "Code";
      bool continue_message = false;
      if (i > 0 && !is_response(name) && !code && messages.back().labels.back() != "Code") {
        if (rng.uniform() < config.same_message) {
          continue_message = true;
        } else if (rng.uniform() < 0.3) {
          // same speaker, new message
        } else {
          speaker = (speaker + 1 + rng.below(speakers - 1)) % speakers;
        }
      } else if (i > 0) {
        speaker = (speaker + 1 + rng.below(speakers - 1)) % speakers;
      }
      const auto leaves = kLeaves.find(name);
      const std::string gold = leaves == kLeaves.end() ? name : leaves->second[rng.below(leaves->second.size())];
      const std::string text = sentence_text(name, rng, config.ambiguity);
      if (continue_message) {
        messages.back().texts.push_back(text);
        messages.back().labels.push_back(gold);
        continue;
      }
      if (i > 0) {
        const double gap = rng.uniform() < 0.02 ? rng.uniform(2 * 3600.0, 20 * 3600.0) : 5.0 + rng.exponential(60.0);
        clock += std::chrono::microseconds(static_cast<std::int64_t>(gap * 1e6));
      }
      messages.push_back({kPeople[speaker], clock, {text}, {gold}});
    }

    std::vector<Message> built;
    std::vector<std::string> gold;
    for (std::size_t m = 0; m < messages.size(); ++m) {
      std::string text;
      for (const auto& t : messages[m].texts) text += (text.empty() ? "" : "\n") + t;
      built.push_back(Message{dialogue_id + ":" + std::to_string(m), messages[m].speaker, messages[m].ts, text,
                              dialogue_id});
      gold.insert(gold.end(), messages[m].labels.begin(), messages[m].labels.end());
    }
    Dialogue dialogue = Dialogue::build(dialogue_id, std::move(built));
    if (dialogue.sentences().size() != gold.size()) {
      throw Error("synthetic text split into an unexpected number of sentences");
    }
    for (std::size_t k = 0; k < gold.size(); ++k) {
      dialogue.mutable_sentences()[k].gold_label = gold[k];
      dialogue.mutable_sentences()[k].gold_source = AnnotationSource::kHuman;
    }
    corpus.dialogues.push_back(std::move(dialogue));
    produced += length;
  }
  return corpus;
}

std::string corpus_transcript(const SyntheticCorpus& corpus) {
  std::string out;
  for (const auto& d : corpus.dialogues) out += serialize_transcript(d);
  return out;
}

std::string corpus_annotations(const SyntheticCorpus& corpus) {
  std::string out;
  const Timestamp created = parse_timestamp("2021-06-01T00:00:00Z");
  for (const auto& d : corpus.dialogues) {
    for (const auto& s : d.sentences()) {
      if (!s.gold_label) continue;
      AnnotationRecord r;
      r.sentence_id = s.id;
      r.label = *s.gold_label;
      r.annotator = "generator";
      r.created_at = created;
      out += serialize_annotation(r);
      out += '\n';
    }
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> generate_clustered(std::uint64_t seed, const Taxonomy& taxonomy,
                                                                    std::size_t per_label) {
  Rng rng(seed);
  auto word = [&](const std::string& prefix, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < n; ++k) out.push_back(prefix + std::to_string(k));
    return out;
  };
  std::map<std::string, std::vector<std::string>> class_words;
  for (const auto& l : taxonomy.labels()) {
    const auto& root = taxonomy.root(l.id);
    if (!class_words.count(root)) class_words[root] = word(to_lower_ascii(root) + "w", 12);
  }
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& l : taxonomy.labels()) {
    if (l.synthesized) continue;
    std::string slug = to_lower_ascii(l.id);
    std::replace(slug.begin(), slug.end(), '-', 'x');
    const auto own = word(slug + "q", 3);
    const auto& shared = class_words.at(taxonomy.root(l.id));
    for (std::size_t k = 0; k < per_label; ++k) {
      std::string text;
      for (int w = 0; w < 5; ++w) text += shared[rng.below(shared.size())] + " ";
      text += own[rng.below(own.size())];
      out.emplace_back(text, l.id);
    }
  }
  return out;
}

}  // namespace chatact
