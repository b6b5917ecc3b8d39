#include "doctest.h"

#include "pathmon/csv.hpp"
#include "pathmon/digest.hpp"
#include "pathmon/error.hpp"
#include "pathmon/timestamp.hpp"

using namespace pathmon;

TEST_CASE("iso round trip and ordering") {
    auto t = Timestamp::parse_iso("2020-03-10T14:30:00Z");
    REQUIRE(t);
    CHECK(t->to_iso() == "2020-03-10T14:30:00Z");
    CHECK(*t == Timestamp::from_civil(2020, 3, 10, 14, 30));
    CHECK(*Timestamp::parse_iso("2020-03-10 14:30") == *t);
    CHECK(*Timestamp::parse_iso("2020-03-10T16:30:00+02:00") == *t);
    CHECK(Timestamp::from_civil(1970, 1, 1).epoch_seconds() == 0);
    CHECK(Timestamp::from_civil(2000, 2, 29) < Timestamp::from_civil(2000, 3, 1));
    CHECK_FALSE(Timestamp::parse_iso("2020-02-30"));
    CHECK_FALSE(Timestamp::parse_iso("2020-13-01T00:00:00"));
    CHECK_FALSE(Timestamp::parse_iso("not a date"));
}

TEST_CASE("assumed timezone is applied to naive times") {
    auto t = Timestamp::parse_iso("2020-03-10 12:00:00", UtcOffset::parse("+01:00"));
    REQUIRE(t);
    CHECK(t->to_iso() == "2020-03-10T11:00:00Z");
    CHECK(UtcOffset::parse("-0530").seconds == -(5 * 3600 + 30 * 60));
    CHECK(UtcOffset::parse("Z").seconds == 0);
}

TEST_CASE("build_timestamp combines date and time") {
    auto both = build_timestamp("2020-03-10", "14:30");
    REQUIRE(both.value);
    CHECK(both.value->to_iso() == "2020-03-10T14:30:00Z");
    CHECK_FALSE(both.time_inferred);

    auto date_only = build_timestamp("2020-03-10", std::nullopt);
    REQUIRE(date_only.value);
    CHECK(date_only.value->to_iso() == "2020-03-10T00:00:00Z");
    CHECK(date_only.time_inferred);

    CHECK_FALSE(build_timestamp(std::nullopt, "14:30").value);

    auto bad = build_timestamp("2020-03-99", "14:30");
    CHECK_FALSE(bad.value);
    CHECK(bad.malformed);
    auto bad_time = build_timestamp("2020-03-10", "25:00");
    CHECK_FALSE(bad_time.value);
    CHECK(bad_time.malformed);
}

TEST_CASE("csv parsing honours quotes and reports ragged rows") {
    auto doc = csv::parse("a,b\n1,\"x,y\"\n\n2,\"he said \"\"hi\"\"\"\n", ',', "mem");
    REQUIRE(doc.rows.size() == 2);
    CHECK(doc.rows[0][1] == "x,y");
    CHECK(doc.rows[1][1] == "he said \"hi\"");
    CHECK_THROWS_AS(csv::parse("a,b\n1,2,3\n", ',', "mem"), Error);
    CHECK(csv::escape("plain") == "plain");
    CHECK(csv::escape("a,b") == "\"a,b\"");
}

TEST_CASE("sha256 of known input") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
