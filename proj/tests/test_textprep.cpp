#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "tweetrec/textprep.hpp"

using namespace tweetrec;

namespace {

using Words = std::vector<std::string>;

UnigramDictionary dict_of(std::unordered_map<std::string, std::uint64_t> counts) {
    return UnigramDictionary(std::move(counts));
}

Vocabulary small_vocab() {
    return Vocabulary({"[PAD]", "[UNK]", "news", "tweet", "rally", "##s", "ab", "##c", "a", "##b", "."});
}

std::string repeat_words(const std::string& w, std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + w;
    return out;
}

} // namespace

TEST_CASE("split_camel_underscore examples") {
    CHECK(split_camel_underscore("BlackLivesMatter") == Words{"Black", "Lives", "Matter"});
    CHECK(split_camel_underscore("covid_19") == Words{"covid", "19"});
    CHECK_FALSE(split_camel_underscore("blacklivesmatter").has_value());
}

TEST_CASE("split_camel_underscore handles digit transitions and stray underscores") {
    CHECK(split_camel_underscore("covid19") == Words{"covid", "19"});
    CHECK(split_camel_underscore("COVID_19") == Words{"COVID", "19"});
    CHECK(split_camel_underscore("__a__b") == Words{"a", "b"});
}

TEST_CASE("segment_max_prob examples") {
    const auto dict = dict_of({{"new", 10}, {"york", 5}, {"city", 20}});
    CHECK(segment_max_prob("newyorkcity", dict) == Words{"new", "york", "city"});
    CHECK(segment_max_prob("newyorkcity", dict) == oracle::segment_exhaustive("newyorkcity", dict));
    CHECK(segment_max_prob("city", dict_of({{"city", 20}})) == Words{"city"});
    CHECK(segment_max_prob("qzxv", dict) == Words{"qzxv"});
}

TEST_CASE("segment_max_prob prefers the more probable split") {
    const auto dict = dict_of({{"a", 1}, {"b", 1}, {"ab", 100}});
    CHECK(segment_max_prob("ab", dict) == Words{"ab"});
    const auto flipped = dict_of({{"a", 100}, {"b", 100}, {"ab", 1}});
    CHECK(segment_max_prob("ab", flipped) == Words{"a", "b"});
}

TEST_CASE("segment_max_prob breaks exact ties by fewer segments") {
    // total 9: P(ab) = 1/9 and P(a)P(b) = 3/9 * 3/9 = 1/9.
    const auto tie = dict_of({{"a", 3}, {"b", 3}, {"ab", 1}, {"zz", 2}});
    CHECK(segment_max_prob("ab", tie) == Words{"ab"});
    CHECK(segment_max_prob("ab", tie) == oracle::segment_exhaustive("ab", tie));
}

TEST_CASE("segment_max_prob passes over-long tokens through") {
    const std::string longest(41, 'a');
    CHECK(segment_max_prob(longest, dict_of({{"a", 5}})) == Words{longest});
    const std::string fits(40, 'a');
    CHECK(segment_max_prob(fits, dict_of({{std::string(20, 'a'), 5}})) == Words{fits.substr(0, 20), fits.substr(20)});
}

TEST_CASE("segment_max_prob matches exhaustive enumeration on random dictionaries") {
    Rng rng(2024);
    const std::string alphabet = "abc";
    for (int trial = 0; trial < 400; ++trial) {
        std::unordered_map<std::string, std::uint64_t> counts;
        const std::size_t entries = 1 + rng.index(12);
        for (std::size_t e = 0; e < entries; ++e) {
            std::string w;
            const std::size_t len = 1 + rng.index(4);
            for (std::size_t i = 0; i < len; ++i) w += alphabet[rng.index(alphabet.size())];
            counts[w] = 1 + rng.index(trial % 3 == 0 ? 3 : 50);
        }
        const auto dict = dict_of(counts);
        std::string token;
        const std::size_t len = 1 + rng.index(12);
        for (std::size_t i = 0; i < len; ++i) token += alphabet[rng.index(alphabet.size())];
        const auto got = segment_max_prob(token, dict);
        CHECK(got == oracle::segment_exhaustive(token, dict));
        std::string joined;
        for (const auto& p : got) joined += p;
        CHECK(joined == token);
    }
}

TEST_CASE("expand_compound_tokens examples") {
    const UnigramDictionary empty;
    CHECK(expand_compound_tokens("#BlackLivesMatter rally", empty) == "Black Lives Matter rally");
    CHECK(expand_compound_tokens("@john_smith said", empty) == "john smith said");
    CHECK(expand_compound_tokens("no tags here", empty) == "no tags here");
}

TEST_CASE("expand_compound_tokens falls back to segmentation, then the bare token") {
    const auto dict = dict_of({{"new", 10}, {"york", 5}, {"city", 20}});
    CHECK(expand_compound_tokens("visit #newyorkcity today", dict) == "visit new york city today");
    CHECK(expand_compound_tokens("#qzxv", dict) == "qzxv");
}

TEST_CASE("expand_compound_tokens is idempotent") {
    const auto dict = dict_of({{"new", 10}, {"york", 5}, {"city", 20}, {"black", 3}, {"lives", 3}, {"matter", 3}});
    const std::vector<std::string> inputs = {"#BlackLivesMatter rally", "@john_smith said", "#newyorkcity #blacklivesmatter",
                                             "a # b @ c", "##double @@at", "mixed#inline @x_y_z9 end", ""};
    for (const auto& in : inputs) {
        const auto once = expand_compound_tokens(in, dict);
        CHECK(expand_compound_tokens(once, dict) == once);
    }
}

TEST_CASE("serialize_creator_context examples") {
    const CreatorProfile full{"1", "jack", "Jack", "bio text", "https://jack.example", "SF", 1};
    CHECK(serialize_creator_context(full) ==
          "screen: jack display: Jack bio: bio text website: https://jack.example location: SF");
    AttributeSet no_bio = all_attributes();
    no_bio.erase(Attribute::Bio);
    const auto s = serialize_creator_context(full, no_bio);
    CHECK(s.find("bio:") == std::string::npos);
    CHECK(s == "screen: jack display: Jack website: https://jack.example location: SF");
    CHECK(serialize_creator_context(CreatorProfile{"2", {}, {}, {}, {}, {}, 1}).empty());
    CHECK(serialize_creator_context(CreatorProfile{"3", "", {}, "only bio", {}, {}, 1}) == "bio: only bio");
}

TEST_CASE("serialize_creator_context respects the length bound for bound-respecting profiles") {
    const CreatorProfile worst{"c", std::string(15, 'x'), std::string(50, 'x'), std::string(160, 'x'),
                               std::string(100, 'x'), std::string(30, 'x'), 1};
    const std::string s = serialize_creator_context(worst);
    CHECK(s.size() == 400);
    std::size_t content = 0;
    for (Attribute a : kAllAttributes) content += attribute_name(a).size();
    content += 15 + 50 + 160 + 100 + 30 + kAllAttributes.size();
    CHECK(content <= 391);
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        auto field = [&](std::size_t max) { return std::string(rng.index(max + 1), 'y'); };
        const CreatorProfile p{"c", field(15), field(50), field(160), field(100), field(30), 1};
        CHECK(serialize_creator_context(p).size() <= s.size());
    }
}

TEST_CASE("tokenize_for_role role caps") {
    const Vocabulary vocab = small_vocab();
    CHECK(role_cap(Role::News) == 512);
    CHECK(role_cap(Role::Tweet) == 128);
    CHECK(role_cap(Role::Creator) == 128);
    CHECK(role_cap(Role::EarlyFusion) == 256);
    CHECK(tokenize_for_role(repeat_words("news", 600), vocab, Role::News).ids.size() == 512);
    const auto tweet = tokenize_for_role(repeat_words("tweet", 5), vocab, Role::Tweet);
    CHECK(tweet.ids.size() == 5);
    CHECK(tweet.role == Role::Tweet);
    CHECK(tokenize_for_role(repeat_words("rally", 300), vocab, Role::EarlyFusion).ids.size() == 256);
}

TEST_CASE("tokenize_for_role uses greedy longest match with continuation pieces") {
    const Vocabulary vocab = small_vocab();
    auto id = [&](std::string_view p) { return *vocab.find(p); };
    CHECK(tokenize_for_role("Rallys.", vocab, Role::Tweet).ids ==
          std::vector<TokenId>{id("rally"), id("##s"), id(".")});
    CHECK(tokenize_for_role("abc ab", vocab, Role::Tweet).ids == std::vector<TokenId>{id("ab"), id("##c"), id("ab")});
    CHECK(tokenize_for_role("zq", vocab, Role::Tweet).ids == std::vector<TokenId>{id("[UNK]"), id("[UNK]")});
    CHECK(tokenize_for_role("", vocab, Role::Tweet).ids.empty());
    CHECK_THROWS_AS(tokenize_for_role("x", Vocabulary{}, Role::Tweet), InvalidInput);
}

TEST_CASE("tokenize_for_role never exceeds the role cap") {
    const Vocabulary vocab = small_vocab();
    Rng rng(17);
    const std::string chars = "abcnewsz. ";
    for (int i = 0; i < 200; ++i) {
        std::string text;
        const std::size_t len = rng.index(2000);
        for (std::size_t j = 0; j < len; ++j) text += chars[rng.index(chars.size())];
        for (Role r : {Role::News, Role::Tweet, Role::Creator, Role::EarlyFusion})
            CHECK(tokenize_for_role(text, vocab, r).ids.size() <= role_cap(r));
    }
}

TEST_CASE("vocabulary and dictionary file formats") {
    const Vocabulary v = Vocabulary::from_lines("[PAD]\n[UNK]\nhello\n##lo\n");
    CHECK(v.size() == 4);
    CHECK(*v.find("hello") == 2);
    CHECK(v.unknown_id() == 1);
    CHECK(v.blank_id() == 0);
    CHECK(v.max_piece_length() == 5);
    CHECK(Vocabulary::from_lines(v.to_lines()).size() == v.size());
    CHECK_THROWS_AS(Vocabulary({"a", "[UNK]", "a"}), InvalidInput);
    CHECK_THROWS_AS(Vocabulary({"a"}), InvalidInput);

    const auto d = UnigramDictionary::from_tsv("New\t3\nnew\t2\ncity\t5\n");
    CHECK(d.count("new") == 5);
    CHECK(d.total() == 10);
    CHECK(d.count("missing") == 0);
    CHECK_THROWS_AS(dict_of({{"zero", 0}}), InvalidInput);
}

TEST_CASE("role names round-trip") {
    for (Role r : {Role::News, Role::Tweet, Role::Creator, Role::EarlyFusion}) CHECK(parse_role(role_name(r)) == r);
    CHECK_THROWS(parse_role("headline"));
}
