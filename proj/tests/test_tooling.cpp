#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace envsmith;
using support::minienv;
using support::mini_doc;

namespace {

ArgMap ref_arg(const std::string& name, const std::string& key) {
  ArgMap m;
  m[name] = Value::text(key);
  return m;
}

}  // namespace

TEST_CASE("tool specs round trip through json") {
  Environment env = minienv();
  for (const auto& t : env.tools) {
    ToolSpec back = tool_from_json(tool_to_json(t));
    CHECK(tool_to_json(back).dump() == tool_to_json(t).dump());
    CHECK(tool_digest(back) == tool_digest(t));
  }
}

TEST_CASE("validation rejects malformed tools") {
  Environment env = minienv();
  auto broken = [&](const char* src) {
    return validate_tool(*env.schema, tool_from_json(json::parse(src)));
  };

  // Unknown binding in an expression.
  CHECK_FALSE(broken(R"({
    "name": "bad1", "description": "x", "params": [],
    "returns": {"shape": "scalar", "kind": "integer", "name": "v"},
    "reads": [], "writes": [],
    "effect": [{"op": "RETURN", "expr": "ghost + 1"}]
  })").empty());

  // Kind mismatch: text plus integer.
  CHECK_FALSE(broken(R"({
    "name": "bad2", "description": "x",
    "params": [{"name": "w", "kind": "text"}],
    "returns": {"shape": "scalar", "kind": "integer", "name": "v"},
    "reads": [], "writes": [],
    "effect": [{"op": "RETURN", "expr": "w + 1"}]
  })").empty());

  // Write outside the declared patterns.
  CHECK_FALSE(broken(R"({
    "name": "bad3", "description": "x",
    "params": [{"name": "user_id", "kind": "reference", "ref": "users"}],
    "returns": {"shape": "scalar", "kind": "integer", "name": "v"},
    "reads": ["users.*"], "writes": [],
    "effect": [
      {"op": "GET", "path": "users.{user_id}.points", "out": "p"},
      {"op": "SET", "path": "users.{user_id}.points", "value": "p + 1"},
      {"op": "RETURN", "expr": "p"}
    ]
  })").empty());

  // Path into an attribute that does not exist.
  CHECK_FALSE(broken(R"({
    "name": "bad4", "description": "x", "params": [],
    "returns": {"shape": "scalar", "kind": "integer", "name": "v"},
    "reads": ["inventory"], "writes": [],
    "effect": [
      {"op": "GET", "path": "inventory", "out": "v"},
      {"op": "RETURN", "expr": "v"}
    ]
  })").empty());

  for (const auto& t : env.tools) CHECK(validate_tool(*env.schema, t).empty());
}

TEST_CASE("filter over an open record yields entities with their key") {
  Environment env = minienv();
  StateDoc doc = mini_doc(env);
  const ToolSpec* find_user = env.find_tool("find_user");
  REQUIRE(find_user);

  ArgMap args;
  args["email"] = Value::text("bob@example.com");
  ExecOutcome out = execute_tool(*find_user, args, std::move(doc));
  REQUIRE(out.result.ok);
  CHECK(out.result.value.as_text() == "bob");

  args["email"] = Value::text("zoe@example.com");
  ExecOutcome miss = execute_tool(*find_user, args, std::move(out.doc));
  CHECK_FALSE(miss.result.ok);
  CHECK(miss.result.error_code == "no_such_user");
}

TEST_CASE("a successful call mutates state and reports the new hash") {
  Environment env = minienv();
  StateDoc doc = mini_doc(env);
  const ToolSpec* deposit = env.find_tool("deposit");
  REQUIRE(deposit);

  ArgMap args = ref_arg("user_id", "ann");
  args["amount"] = Value::decimal(*Decimal::parse("5.00"));
  ExecOutcome out = execute_tool(*deposit, args, std::move(doc));
  REQUIRE(out.result.ok);

  // 135.95 + 5.00, checked by hand.
  CHECK(out.result.value.as_record().at("balance").as_decimal().str() == "140.95");
  const Value* bal = out.doc.get(parse_path("users.ann.balance", false));
  REQUIRE(bal);
  CHECK(bal->as_decimal().str() == "140.95");
  CHECK(out.doc.root().as_record().at("transactions").as_list().size() == 1);
  CHECK(out.doc.root().as_record().at("ops_count").as_integer() == 1);
  CHECK(out.result.state_after_hash == out.doc.doc_hash());
}

TEST_CASE("a failing call rolls back every write") {
  Environment env = minienv();
  StateDoc doc = mini_doc(env);
  std::string before = doc.canonical_text();
  const ToolSpec* deposit = env.find_tool("deposit");

  // The assert fires before any write.
  ArgMap args = ref_arg("user_id", "ann");
  args["amount"] = Value::decimal(*Decimal::parse("-1.00"));
  ExecOutcome out = execute_tool(*deposit, args, std::move(doc));
  CHECK_FALSE(out.result.ok);
  CHECK(out.result.error_code == "bad_amount");
  CHECK(out.doc.canonical_text() == before);

  // A tool that writes first and then fails must leave no trace either.
  const char* src = R"fx({
    "name": "teaser", "description": "writes then fails",
    "params": [{"name": "user_id", "kind": "reference", "ref": "users"}],
    "returns": {"shape": "scalar", "kind": "integer", "name": "v"},
    "reads": ["users.*", "ops_count"], "writes": ["users.*.points", "ops_count", "transactions"],
    "effect": [
      {"op": "GET", "path": "users.{user_id}.points", "out": "p"},
      {"op": "SET", "path": "users.{user_id}.points", "value": "p + 7"},
      {"op": "APPEND", "path": "transactions", "value": "{who: user_id, amount: 1.00}"},
      {"op": "ASSERT", "cond": "p < 0", "code": "always_fails"},
      {"op": "RETURN", "expr": "p"}
    ]
  })fx";
  ToolSpec teaser = tool_from_json(json::parse(src));
  REQUIRE(validate_tool(*env.schema, teaser).empty());
  ExecOutcome rolled = execute_tool(teaser, ref_arg("user_id", "ann"), std::move(out.doc));
  CHECK_FALSE(rolled.result.ok);
  CHECK(rolled.result.error_code == "always_fails");
  CHECK(rolled.doc.canonical_text() == before);
}

TEST_CASE("argument errors are data, not exceptions") {
  Environment env = minienv();
  const ToolSpec* deposit = env.find_tool("deposit");

  ExecOutcome missing = execute_tool(*deposit, ref_arg("user_id", "ann"), mini_doc(env));
  CHECK_FALSE(missing.result.ok);
  CHECK(missing.result.error_code == "missing_argument");

  ArgMap unknown = ref_arg("user_id", "ann");
  unknown["amount"] = Value::decimal(*Decimal::parse("1.00"));
  unknown["tip"] = Value::text("x");
  ExecOutcome extra = execute_tool(*deposit, unknown, mini_doc(env));
  CHECK_FALSE(extra.result.ok);
  CHECK(extra.result.error_code == "unknown_argument");

  ArgMap wrong = ref_arg("user_id", "ann");
  wrong["amount"] = Value::boolean(true);
  ExecOutcome bad = execute_tool(*deposit, wrong, mini_doc(env));
  CHECK_FALSE(bad.result.ok);
  CHECK(bad.result.error_code == "arg_kind_mismatch");

  // A missing entity surfaces where it is first touched: reads say
  // not_found, writing a reference to nowhere says dangling_reference.
  ArgMap ghost_args = ref_arg("user_id", "zoe");
  ghost_args["amount"] = Value::decimal(*Decimal::parse("1.00"));
  ExecOutcome ghost = execute_tool(*deposit, ghost_args, mini_doc(env));
  CHECK_FALSE(ghost.result.ok);
  CHECK(ghost.result.error_code == "not_found");

  const char* src = R"fx({
    "name": "log_only", "description": "records a transaction without looking",
    "params": [{"name": "user_id", "kind": "reference", "ref": "users"}],
    "returns": {"shape": "scalar", "kind": "boolean", "name": "done"},
    "reads": [], "writes": ["transactions"],
    "effect": [
      {"op": "APPEND", "path": "transactions", "value": "{who: user_id, amount: 1.00}"},
      {"op": "RETURN", "expr": "true"}
    ]
  })fx";
  ToolSpec log_only = tool_from_json(json::parse(src));
  REQUIRE(validate_tool(*env.schema, log_only).empty());
  ExecOutcome dangle = execute_tool(log_only, ref_arg("user_id", "zoe"), mini_doc(env));
  CHECK_FALSE(dangle.result.ok);
  CHECK(dangle.result.error_code == "dangling_reference");
}

TEST_CASE("optional parameters use their declared default") {
  Environment env = minienv();
  const ToolSpec* split = env.find_tool("split_amount");
  REQUIRE(split);

  ArgMap args;
  args["amount"] = Value::decimal(*Decimal::parse("9.50"));
  ExecOutcome out = execute_tool(*split, args, mini_doc(env));
  REQUIRE(out.result.ok);
  CHECK(out.result.value.as_record().at("share").as_decimal().str() == "4.75");

  args["parts"] = Value::integer(5);
  ExecOutcome five = execute_tool(*split, args, mini_doc(env));
  REQUIRE(five.result.ok);
  CHECK(five.result.value.as_record().at("share").as_decimal().str() == "1.90");
}

TEST_CASE("division failures come back as error codes") {
  Environment env = minienv();
  const ToolSpec* split = env.find_tool("split_amount");

  ArgMap args;
  args["amount"] = Value::decimal(*Decimal::parse("9.50"));
  args["parts"] = Value::integer(0);
  ExecOutcome zero = execute_tool(*split, args, mini_doc(env));
  CHECK_FALSE(zero.result.ok);
  CHECK(zero.result.error_code == "division_by_zero");

  // Quotients round half away from zero at the wider operand scale.
  args["amount"] = Value::decimal(*Decimal::parse("10.00"));
  args["parts"] = Value::integer(3);
  ExecOutcome rounded = execute_tool(*split, args, mini_doc(env));
  REQUIRE(rounded.result.ok);
  CHECK(rounded.result.value.as_record().at("share").as_decimal().str() == "3.33");

  args["amount"] = Value::decimal(*Decimal::parse("0.05"));
  args["parts"] = Value::integer(2);
  ExecOutcome half = execute_tool(*split, args, mini_doc(env));
  REQUIRE(half.result.ok);
  CHECK(half.result.value.as_record().at("share").as_decimal().str() == "0.03");
}

TEST_CASE("pure read classification follows the write list") {
  Environment env = minienv();
  CHECK(env.find_tool("find_user")->pure_read());
  CHECK(env.find_tool("get_balance")->pure_read());
  CHECK(env.find_tool("split_amount")->pure_read());
  CHECK_FALSE(env.find_tool("deposit")->pure_read());
}

TEST_CASE("sequences execute in order and stop at the first failure") {
  Environment env = minienv();
  auto find = [&](const std::string& n) { return env.find_tool(n); };

  ArgMap dep = ref_arg("user_id", "ann");
  dep["amount"] = Value::decimal(*Decimal::parse("2.00"));
  ArgMap bad = ref_arg("user_id", "ann");
  bad["amount"] = Value::decimal(*Decimal::parse("-2.00"));

  std::vector<SequenceStep> steps = {{"deposit", dep}, {"deposit", bad}, {"deposit", dep}};
  SequenceResult r = execute_sequence(find, steps, mini_doc(env));
  CHECK_FALSE(r.ok());
  REQUIRE(r.failed_index.has_value());
  CHECK(*r.failed_index == 1);
  CHECK(r.results.size() == 2);
  // The first deposit persisted, the failed one rolled back, the third
  // never ran.
  CHECK(r.doc.get(parse_path("users.ann.balance", false))->as_decimal().str() == "137.95");

  std::vector<SequenceStep> good = {{"deposit", dep}, {"deposit", dep}};
  SequenceResult ok = execute_sequence(find, good, mini_doc(env));
  CHECK(ok.ok());
  CHECK(ok.doc.get(parse_path("users.ann.balance", false))->as_decimal().str() == "139.95");
}

TEST_CASE("tool results serialize and parse") {
  Environment env = minienv();
  ArgMap args;
  args["email"] = Value::text("ann@example.com");
  ExecOutcome out = execute_tool(*env.find_tool("find_user"), args, mini_doc(env));
  ToolCallResult back = ToolCallResult::from_json(out.result.to_json());
  CHECK(back.ok == out.result.ok);
  CHECK(back.value.as_text() == "ann");
  CHECK(back.state_after_hash == out.result.state_after_hash);

  args["email"] = Value::text("zoe@example.com");
  ExecOutcome miss = execute_tool(*env.find_tool("find_user"), args, mini_doc(env));
  ToolCallResult mback = ToolCallResult::from_json(miss.result.to_json());
  CHECK_FALSE(mback.ok);
  CHECK(mback.error_code == "no_such_user");
}

TEST_CASE("environment directories round trip") {
  Environment env = minienv();
  support::TempDir tmp("envdir");
  save_environment(tmp.path / "mini", *env.schema, env.tools);

  CHECK(fs::exists(tmp.path / "mini" / "schema.json"));
  CHECK(fs::exists(tmp.path / "mini" / "tools" / "manifest.json"));
  CHECK(fs::exists(tmp.path / "mini" / "tools" / "deposit.json"));

  Environment back = load_environment(tmp.path / "mini");
  CHECK(back.manifest_digest == env.manifest_digest);
  CHECK(back.tools.size() == env.tools.size());
  CHECK(schema_to_json(*back.schema).dump() == schema_to_json(*env.schema).dump());

  // A tampered tool file changes the digest.
  json t = read_json(tmp.path / "mini" / "tools" / "deposit.json");
  t["description"] = "different";
  write_json(tmp.path / "mini" / "tools" / "deposit.json", t);
  Environment tampered = load_environment(tmp.path / "mini");
  CHECK(tampered.manifest_digest != env.manifest_digest);
}
