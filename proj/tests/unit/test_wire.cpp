#include "soundgrid/error.hpp"
#include "soundgrid/wire.hpp"

#include <doctest.h>

#include <sys/socket.h>

using namespace soundgrid;

TEST_CASE("message encoding") {
    CHECK(encode_message(HelloMessage{"s1", 1}) == "HELLO s1 1\n");
    CHECK(encode_message(AckMessage{"s1", parse_timestamp("2025-07-06T12:01:15Z")}) == "ACK s1 2025-07-06T12:01:15Z\n");
    CHECK(encode_message(ErrorMessage{"validation", "pleasantness out of range"}) ==
          "ERROR validation pleasantness out of range\n");

    for (const WireMessage& m :
         {WireMessage{HelloMessage{"node_3", 1}}, WireMessage{AckMessage{"s2", parse_timestamp("2025-05-12T00:00:03Z")}},
          WireMessage{ErrorMessage{"protocol", "RECORD before HELLO"}}}) {
        std::string line = encode_message(m);
        line.pop_back();
        CHECK(decode_message(line) == m);
    }
    auto rec = decode_message("s1,2025-07-06T12:01:15Z,112.0000,0.1000,0.9000,0.0000,1.0000,0.0000,0.2000");
    REQUIRE(std::holds_alternative<MeasurementRecord>(rec));
    CHECK(std::get<MeasurementRecord>(rec).laeq_db == 112.0);

    CHECK_THROWS_AS(decode_message("HELLO s1"), ParseError);
    CHECK_THROWS_AS(decode_message("HELLO s1 x"), ParseError);
    CHECK_THROWS_AS(decode_message("ACK s1"), ParseError);
    CHECK_THROWS_AS(decode_message("garbage"), ParseError);
}

TEST_CASE("endpoints") {
    auto e = Endpoint::parse("127.0.0.1:7878");
    CHECK(e.host == "127.0.0.1");
    CHECK(e.port == 7878);
    CHECK(Endpoint::parse("localhost:1").to_string() == "localhost:1");
    CHECK_THROWS_AS(Endpoint::parse("127.0.0.1"), ConfigError);
    CHECK_THROWS_AS(Endpoint::parse("127.0.0.1:99999"), ConfigError);
}

TEST_CASE("line reader over a socket pair") {
    int fds[2];
    REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0);
    Socket a(fds[0]), b(fds[1]);
    std::string tapped;
    LineReader reader(b.fd(), 32);
    reader.set_tap([&](std::string_view s) { tapped += s; });

    a.send_all("one\r\ntw");
    std::string line;
    CHECK(reader.read_line(line, std::chrono::milliseconds{500}) == LineReader::Status::line);
    CHECK(line == "one");
    CHECK(reader.read_line(line, std::chrono::milliseconds{50}) == LineReader::Status::timeout);
    a.send_all("o\n");
    CHECK(reader.read_line(line, std::chrono::milliseconds{500}) == LineReader::Status::line);
    CHECK(line == "two");
    CHECK(tapped == "one\r\ntwo\n");

    a.send_all(std::string(40, 'x'));
    CHECK_THROWS_AS(reader.read_line(line, std::chrono::milliseconds{500}), ProtocolError);

    a.close();
    LineReader fresh(b.fd());
    CHECK(fresh.read_line(line, std::chrono::milliseconds{500}) == LineReader::Status::closed);
}

TEST_CASE("tcp connect failures are io errors") {
    auto listener = listen_tcp({"127.0.0.1", 0});
    const auto port = local_port(listener);
    CHECK(port != 0);
    listener.close();
    CHECK_THROWS_AS(connect_tcp({"127.0.0.1", port}, std::chrono::milliseconds{500}), IoError);
}
