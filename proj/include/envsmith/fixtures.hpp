#pragma once

#include "envsmith/envdir.hpp"

namespace envsmith {

/// The environment the offline pipeline ships with: a small storefront
/// whose tools cover lookups, money movement and an order lifecycle. Kept
/// in code so `synth-env` works without any generation backend.
inline Environment shop_environment() {
  json sj = json::parse(R"fx({
    "id": "shop",
    "attributes": [
      {"name": "users", "kind": "record", "open": true, "description": "customer accounts", "fields": [
        {"name": "email", "kind": "scalar", "value_kind": "text"},
        {"name": "name", "kind": "scalar", "value_kind": "text"},
        {"name": "balance", "kind": "scalar", "value_kind": "decimal", "scale": 2},
        {"name": "points", "kind": "scalar", "value_kind": "integer"}
      ]},
      {"name": "products", "kind": "record", "open": true, "description": "catalog", "fields": [
        {"name": "name", "kind": "scalar", "value_kind": "text"},
        {"name": "price", "kind": "scalar", "value_kind": "decimal", "scale": 2},
        {"name": "stock", "kind": "scalar", "value_kind": "integer"}
      ]},
      {"name": "orders", "kind": "record", "open": true, "description": "orders by id", "fields": [
        {"name": "user", "kind": "scalar", "value_kind": "reference", "ref": "users"},
        {"name": "product", "kind": "scalar", "value_kind": "reference", "ref": "products"},
        {"name": "quantity", "kind": "scalar", "value_kind": "integer"},
        {"name": "total", "kind": "scalar", "value_kind": "decimal", "scale": 2},
        {"name": "status", "kind": "scalar", "value_kind": "text"}
      ]},
      {"name": "transactions", "kind": "list", "description": "money movement log", "fields": [
        {"name": "who", "kind": "scalar", "value_kind": "reference", "ref": "users"},
        {"name": "amount", "kind": "scalar", "value_kind": "decimal", "scale": 2},
        {"name": "note", "kind": "scalar", "value_kind": "text"}
      ]},
      {"name": "next_order_seq", "kind": "scalar", "value_kind": "integer"},
      {"name": "audit_events", "kind": "scalar", "value_kind": "integer", "volatile": true,
       "description": "operation counter, excluded from state comparison"}
    ]
  })fx");
  auto schema = load_schema(sj);

  const char* tool_srcs[] = {
      R"fx({
        "name": "find_user_by_email",
        "description": "Look up the account id for an email address.",
        "params": [{"name": "email", "kind": "text"}],
        "returns": {"shape": "scalar", "kind": "reference", "name": "user_id", "ref": "users"},
        "reads": ["users"],
        "writes": [],
        "effect": [
          {"op": "GET", "path": "users", "out": "all"},
          {"op": "FILTER", "in": "all", "bind": "u", "where": "u.email == email", "out": "ms"},
          {"op": "ASSERT", "cond": "len(ms) > 0", "code": "no_such_user"},
          {"op": "RETURN", "expr": "first(ms)._key"}
        ]
      })fx",
      R"fx({
        "name": "get_user",
        "description": "Read an account's profile.",
        "params": [{"name": "user_id", "kind": "reference", "ref": "users"}],
        "returns": {"shape": "record", "fields": [
          {"name": "email", "kind": "text"},
          {"name": "name", "kind": "text"},
          {"name": "balance", "kind": "decimal"}
        ]},
        "reads": ["users.*"],
        "writes": [],
        "effect": [
          {"op": "GET", "path": "users.{user_id}", "out": "u"},
          {"op": "RETURN", "expr": "{email: u.email, name: u.name, balance: u.balance}"}
        ]
      })fx",
      R"fx({
        "name": "get_balance",
        "description": "Read an account's balance.",
        "params": [{"name": "user_id", "kind": "reference", "ref": "users"}],
        "returns": {"shape": "record", "fields": [{"name": "balance", "kind": "decimal"}]},
        "reads": ["users.*.balance"],
        "writes": [],
        "effect": [
          {"op": "GET", "path": "users.{user_id}.balance", "out": "b"},
          {"op": "RETURN", "expr": "{balance: b}"}
        ]
      })fx",
      R"fx({
        "name": "deposit",
        "description": "Add funds to an account.",
        "params": [{"name": "user_id", "kind": "reference", "ref": "users"},
                   {"name": "amount", "kind": "decimal"}],
        "returns": {"shape": "record", "fields": [{"name": "balance", "kind": "decimal"}]},
        "reads": ["users.*.balance", "audit_events"],
        "writes": ["users.*.balance", "transactions", "audit_events"],
        "effect": [
          {"op": "ASSERT", "cond": "amount > 0.00", "code": "bad_amount"},
          {"op": "GET", "path": "users.{user_id}.balance", "out": "b"},
          {"op": "COMPUTE", "expr": "b + amount", "out": "nb"},
          {"op": "SET", "path": "users.{user_id}.balance", "value": "nb"},
          {"op": "APPEND", "path": "transactions",
           "value": "{who: user_id, amount: amount, note: 'deposit'}"},
          {"op": "GET", "path": "audit_events", "out": "c"},
          {"op": "SET", "path": "audit_events", "value": "c + 1"},
          {"op": "RETURN", "expr": "{balance: nb}"}
        ]
      })fx",
      R"fx({
        "name": "transfer",
        "description": "Move funds between two accounts.",
        "params": [{"name": "src", "kind": "reference", "ref": "users"},
                   {"name": "dst", "kind": "reference", "ref": "users"},
                   {"name": "amount", "kind": "decimal"}],
        "returns": {"shape": "record", "fields": [
          {"name": "src_balance", "kind": "decimal"},
          {"name": "dst_balance", "kind": "decimal"}
        ]},
        "reads": ["users.*.balance", "audit_events"],
        "writes": ["users.*.balance", "transactions", "audit_events"],
        "effect": [
          {"op": "ASSERT", "cond": "src != dst", "code": "same_account"},
          {"op": "ASSERT", "cond": "amount > 0.00", "code": "bad_amount"},
          {"op": "GET", "path": "users.{src}.balance", "out": "a"},
          {"op": "ASSERT", "cond": "a >= amount", "code": "insufficient_funds"},
          {"op": "GET", "path": "users.{dst}.balance", "out": "b"},
          {"op": "COMPUTE", "expr": "a - amount", "out": "na"},
          {"op": "COMPUTE", "expr": "b + amount", "out": "nb"},
          {"op": "SET", "path": "users.{src}.balance", "value": "na"},
          {"op": "SET", "path": "users.{dst}.balance", "value": "nb"},
          {"op": "APPEND", "path": "transactions",
           "value": "{who: src, amount: amount, note: 'transfer'}"},
          {"op": "GET", "path": "audit_events", "out": "c"},
          {"op": "SET", "path": "audit_events", "value": "c + 1"},
          {"op": "RETURN", "expr": "{src_balance: na, dst_balance: nb}"}
        ]
      })fx",
      R"fx({
        "name": "list_products",
        "description": "List every product id in the catalog.",
        "params": [],
        "returns": {"shape": "list", "kind": "reference", "name": "product_id", "ref": "products"},
        "reads": ["products"],
        "writes": [],
        "effect": [
          {"op": "GET", "path": "products", "out": "all"},
          {"op": "FILTER", "in": "all", "bind": "p", "where": "true", "out": "ms"},
          {"op": "COMPUTE", "expr": "pluck(ms, '_key')", "out": "ks"},
          {"op": "RETURN", "expr": "ks"}
        ]
      })fx",
      R"fx({
        "name": "get_product",
        "description": "Read a product's listing.",
        "params": [{"name": "product_id", "kind": "reference", "ref": "products"}],
        "returns": {"shape": "record", "fields": [
          {"name": "name", "kind": "text"},
          {"name": "price", "kind": "decimal"},
          {"name": "stock", "kind": "integer"}
        ]},
        "reads": ["products.*"],
        "writes": [],
        "effect": [
          {"op": "GET", "path": "products.{product_id}", "out": "p"},
          {"op": "RETURN", "expr": "{name: p.name, price: p.price, stock: p.stock}"}
        ]
      })fx",
      R"fx({
        "name": "create_order",
        "description": "Place an order, reserving stock.",
        "params": [{"name": "user_id", "kind": "reference", "ref": "users"},
                   {"name": "product_id", "kind": "reference", "ref": "products"},
                   {"name": "quantity", "kind": "integer"}],
        "returns": {"shape": "scalar", "kind": "reference", "name": "order_id", "ref": "orders"},
        "reads": ["products.*", "next_order_seq", "audit_events"],
        "writes": ["orders.*", "products.*.stock", "next_order_seq", "audit_events"],
        "effect": [
          {"op": "ASSERT", "cond": "quantity > 0", "code": "bad_quantity"},
          {"op": "GET", "path": "products.{product_id}.stock", "out": "st"},
          {"op": "ASSERT", "cond": "st >= quantity", "code": "out_of_stock"},
          {"op": "GET", "path": "products.{product_id}.price", "out": "pr"},
          {"op": "COMPUTE", "expr": "pr * quantity", "out": "total"},
          {"op": "GET", "path": "next_order_seq", "out": "seq"},
          {"op": "COMPUTE", "expr": "'o_' + str(seq)", "out": "oid"},
          {"op": "SET", "path": "orders.{oid}",
           "value": "{user: user_id, product: product_id, quantity: quantity, total: total, status: 'pending'}"},
          {"op": "SET", "path": "products.{product_id}.stock", "value": "st - quantity"},
          {"op": "SET", "path": "next_order_seq", "value": "seq + 1"},
          {"op": "GET", "path": "audit_events", "out": "c"},
          {"op": "SET", "path": "audit_events", "value": "c + 1"},
          {"op": "RETURN", "expr": "oid"}
        ]
      })fx",
      R"fx({
        "name": "pay_order",
        "description": "Pay for a pending order from the buyer's balance.",
        "params": [{"name": "order_id", "kind": "reference", "ref": "orders"}],
        "returns": {"shape": "record", "fields": [
          {"name": "status", "kind": "text"},
          {"name": "balance", "kind": "decimal"}
        ]},
        "reads": ["orders.*", "users.*.balance", "audit_events"],
        "writes": ["orders.*.status", "users.*.balance", "transactions", "audit_events"],
        "effect": [
          {"op": "GET", "path": "orders.{order_id}", "out": "o"},
          {"op": "ASSERT", "cond": "o.status == 'pending'", "code": "not_pending"},
          {"op": "COMPUTE", "expr": "o.user", "out": "buyer"},
          {"op": "GET", "path": "users.{buyer}.balance", "out": "bal"},
          {"op": "ASSERT", "cond": "bal >= o.total", "code": "insufficient_funds"},
          {"op": "COMPUTE", "expr": "bal - o.total", "out": "nb"},
          {"op": "SET", "path": "users.{buyer}.balance", "value": "nb"},
          {"op": "SET", "path": "orders.{order_id}.status", "value": "'paid'"},
          {"op": "APPEND", "path": "transactions",
           "value": "{who: buyer, amount: o.total, note: 'order payment'}"},
          {"op": "GET", "path": "audit_events", "out": "c"},
          {"op": "SET", "path": "audit_events", "value": "c + 1"},
          {"op": "RETURN", "expr": "{status: 'paid', balance: nb}"}
        ]
      })fx",
      R"fx({
        "name": "cancel_order",
        "description": "Cancel a pending order and restock it.",
        "params": [{"name": "order_id", "kind": "reference", "ref": "orders"}],
        "returns": {"shape": "record", "fields": [{"name": "status", "kind": "text"}]},
        "reads": ["orders.*", "products.*.stock", "audit_events"],
        "writes": ["orders.*.status", "products.*.stock", "audit_events"],
        "effect": [
          {"op": "GET", "path": "orders.{order_id}", "out": "o"},
          {"op": "ASSERT", "cond": "o.status == 'pending'", "code": "not_pending"},
          {"op": "COMPUTE", "expr": "o.product", "out": "prod"},
          {"op": "GET", "path": "products.{prod}.stock", "out": "st"},
          {"op": "SET", "path": "products.{prod}.stock", "value": "st + o.quantity"},
          {"op": "SET", "path": "orders.{order_id}.status", "value": "'cancelled'"},
          {"op": "GET", "path": "audit_events", "out": "c"},
          {"op": "SET", "path": "audit_events", "value": "c + 1"},
          {"op": "RETURN", "expr": "{status: 'cancelled'}"}
        ]
      })fx",
      R"fx({
        "name": "get_order",
        "description": "Read an order's current state.",
        "params": [{"name": "order_id", "kind": "reference", "ref": "orders"}],
        "returns": {"shape": "record", "fields": [
          {"name": "status", "kind": "text"},
          {"name": "total", "kind": "decimal"},
          {"name": "quantity", "kind": "integer"}
        ]},
        "reads": ["orders.*"],
        "writes": [],
        "effect": [
          {"op": "GET", "path": "orders.{order_id}", "out": "o"},
          {"op": "RETURN", "expr": "{status: o.status, total: o.total, quantity: o.quantity}"}
        ]
      })fx"};

  std::vector<ToolSpec> tools;
  for (const char* src : tool_srcs) {
    ToolSpec t = tool_from_json(json::parse(src));
    auto diags = validate_tool(*schema, t);
    if (!diags.empty())
      throw SchemaViolation("fixture tool '" + t.name + "': " + diags.front());
    tools.push_back(std::move(t));
  }
  Environment env;
  env.schema = schema;
  env.tools = std::move(tools);
  env.manifest_digest = environment_digest(*schema, env.tools);
  return env;
}

}  // namespace envsmith
