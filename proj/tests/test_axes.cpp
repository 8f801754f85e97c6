#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "strata/axis.hpp"

using namespace strata;

TEST_CASE("anc follows parent chains root to self") {
  // CSR-style: I dense-fixed, J sparse-variable under I.
  std::vector<Axis> axes = {
      dense_fixed("I", 4),
      sparse_variable("J", "I", 4, 7, "J_indptr", "J_indices"),
  };
  CHECK(anc(axes, 1) == std::vector<int>{0, 1});
  CHECK(anc(axes, 0) == std::vector<int>{0});

  // CSF-style three-level chain.
  std::vector<Axis> csf = {
      dense_fixed("I", 4),
      sparse_variable("J", "I", 4, 7, "J_indptr", "J_indices"),
      sparse_variable("K", "J", 4, 9, "K_indptr", "K_indices"),
  };
  CHECK(anc(csf, 2) == std::vector<int>{0, 1, 2});
}

TEST_CASE("anc errors when a parent is missing") {
  std::vector<Axis> axes = {sparse_variable("J", "I", 4, 7, "Jp", "Ji")};
  CHECK_THROWS_AS(anc(axes, 0), Error);
}

TEST_CASE("validate_axes accepts a plain dense axis") {
  CHECK(validate_axes({dense_fixed("I", 4)}).empty());
}

TEST_CASE("validate_axes flags missing indptr") {
  Axis j = sparse_variable("J", "", 4, 7, "", "J_indices");
  auto v = validate_axes({j});
  REQUIRE(!v.empty());
  bool found = false;
  for (const auto& msg : v)
    if (msg.find("indptr") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("validate_axes flags parent cycles and order violations") {
  // Child declared before parent.
  std::vector<Axis> axes = {
      sparse_variable("J", "I", 4, 7, "Jp", "Ji"),
      dense_fixed("I", 4),
  };
  auto v = validate_axes(axes);
  bool found = false;
  for (const auto& msg : v)
    if (msg.find("declared after") != std::string::npos) found = true;
  CHECK(found);

  // A two-node cycle (requires forging parents).
  Axis a = sparse_variable("A", "B", 4, 4, "Ap", "Ai");
  Axis b = sparse_variable("B", "A", 4, 4, "Bp", "Bi");
  auto v2 = validate_axes({a, b});
  CHECK(!v2.empty());
}

TEST_CASE("validate_axes enforces the four-kind field matrix") {
  // dense-fixed with a parent is rejected
  Axis d = dense_fixed("D", 4);
  d.parent = "I";
  auto v = validate_axes({dense_fixed("I", 4), d});
  CHECK(!v.empty());

  // sparse-fixed nnz_cols must not exceed length
  Axis sf = sparse_fixed("S", "I", 4, 9, "Si");
  auto v2 = validate_axes({dense_fixed("I", 4), sf});
  bool found = false;
  for (const auto& msg : v2)
    if (msg.find("nnz_cols") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("axis_space composes through chains") {
  AxisTable t;
  t.add(dense_fixed("I", 4));
  t.add(sparse_variable("J", "I", 4, 7, "Jp", "Ji"));
  CHECK(axis_space(t, t.at("I")) == 4);
  CHECK(axis_space(t, t.at("J")) == 7);

  AxisTable e;
  e.add(dense_fixed("O", 1));
  e.add(sparse_variable("I", "O", 16, 5, "Ip", "Ii"));
  e.add(sparse_fixed("J", "I", 16, 4, "Ji"));
  CHECK(axis_space(e, e.at("J")) == 20);  // 5 rows x 4 slots
}

TEST_CASE("anc is increasing for dependency-ordered declarations") {
  std::vector<Axis> axes = {
      dense_fixed("I", 8),
      sparse_variable("J", "I", 8, 10, "Jp", "Ji"),
      sparse_variable("K", "J", 8, 12, "Kp", "Ki"),
  };
  for (int i = 0; i < 3; ++i) {
    auto path = anc(axes, i);
    CHECK(static_cast<int>(path.size()) <= 3);
    CHECK(path.back() == i);
    for (size_t q = 1; q < path.size(); ++q) CHECK(path[q - 1] < path[q]);
  }
}
