#include <draglab/image_io.hpp>
#include <draglab/rng.hpp>

#include <doctest.h>

#include <cmath>

using namespace draglab;

TEST_CASE("PNG round trip is exact on 8-bit values") {
    Rng rng(1);
    Tensor img({5, 7, 3});
    for (auto& v : img.values()) v = static_cast<real>(rng.uniform_int(0, 255) / 255.0);
    const Tensor back = decode_png(encode_png(img));
    REQUIRE(back.shape() == img.shape());
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::lround(back[i] * 255) == std::lround(img[i] * 255));
}

TEST_CASE("PNG encoding clamps out-of-range values") {
    Tensor img({1, 2, 3}, std::vector<real>{-1, 0.5, 2, 0, 1, 1.5});
    const Tensor back = decode_png(encode_png(img));
    CHECK(back[0] == 0);
    CHECK(back[2] == 1);
    CHECK(back[5] == 1);
}

TEST_CASE("bad PNG data and shapes are rejected") {
    CHECK_THROWS_AS(decode_png("not a png"), ParseError);
    const std::string good = encode_png(Tensor({4, 4, 3}));
    CHECK_THROWS_AS(decode_png(good.substr(0, good.size() / 2)), ParseError);
    CHECK_THROWS_AS(encode_png(Tensor({4, 4, 1})), ArgumentError);
}

TEST_CASE("bilinear resize") {
    Tensor flat({6, 4, 3}, real(0.4));
    const Tensor r = resize_image(flat, 3, 9);
    CHECK(r.shape() == Shape{3, 9, 3});
    for (real v : r.values()) CHECK(v == doctest::Approx(0.4));
    const Tensor id = resize_image(flat, 6, 4);
    CHECK(id.storage() == flat.storage());
    CHECK_THROWS_AS(resize_image(flat, 0, 3), ArgumentError);
}
