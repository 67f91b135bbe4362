// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentforge/policy.hpp"
#include "agentforge/tools.hpp"

#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace agentforge::retail {

// Refunds issued by a single task may not exceed this amount.
inline constexpr double kRefundLimit = 400.0;

namespace detail {

inline bool order_exists(const EntityStore& store, const std::string& order_id) {
    return store.has_entity("orders", order_id);
}

inline double order_total(const Json& order) {
    double total = 0.0;
    for (const auto& item : order.at("items")) {
        total += item.at("price").get<double>() * item.at("quantity").get<double>();
    }
    return round_cents(total);
}

}  // namespace detail

inline void register_tools(ToolRegistry& registry) {
    // -- read tools ------------------------------------------------------

    registry.register_tool(
        ToolSpec{
            "get_user",
            ToolKind::read,
            {{"user_id", "string", true, "Identifier of the user, e.g. u_1."}},
            "{user_id, name, email, address, membership, payment_methods}",
            {"user_id", "name", "email", "address", "membership", "payment_methods"},
            "Look up a user profile by id.",
        },
        [](const Json& args, EntityStore& store) {
            const std::string user_id = args.at("user_id").get<std::string>();
            if (!store.has_entity("users", user_id)) {
                return ToolResult::failure("user not found: " + user_id);
            }
            return ToolResult::success(store.entity("users", user_id));
        });

    registry.register_tool(
        ToolSpec{
            "get_order",
            ToolKind::read,
            {{"order_id", "string", true, "Identifier of the order, e.g. o_1."}},
            "{order_id, user_id, status, address, items, total, payment_method, refund_amount}",
            {"order_id", "user_id", "status", "address", "items", "item_id", "product_id", "total",
             "refund_amount"},
            "Look up an order, including its items and current status.",
        },
        [](const Json& args, EntityStore& store) {
            const std::string order_id = args.at("order_id").get<std::string>();
            if (!detail::order_exists(store, order_id)) {
                return ToolResult::failure("order not found: " + order_id);
            }
            return ToolResult::success(store.entity("orders", order_id));
        });

    registry.register_tool(
        ToolSpec{
            "get_product",
            ToolKind::read,
            {{"product_id", "string", true, "Identifier of the product, e.g. p_100."}},
            "{product_id, name, price, stock, category}",
            {"product_id", "name", "price", "stock", "category"},
            "Look up a product in the catalog.",
        },
        [](const Json& args, EntityStore& store) {
            const std::string product_id = args.at("product_id").get<std::string>();
            if (!store.has_entity("products", product_id)) {
                return ToolResult::failure("product not found: " + product_id);
            }
            return ToolResult::success(store.entity("products", product_id));
        });

    registry.register_tool(
        ToolSpec{
            "list_user_orders",
            ToolKind::read,
            {{"user_id", "string", true, "Identifier of the user."}},
            "{user_id, order_ids}",
            {"user_id", "order_ids"},
            "List the ids of every order placed by a user.",
        },
        [](const Json& args, EntityStore& store) {
            const std::string user_id = args.at("user_id").get<std::string>();
            if (!store.has_entity("users", user_id)) {
                return ToolResult::failure("user not found: " + user_id);
            }
            Json order_ids = Json::array();
            for (const auto& [order_id, order] : store.collection("orders")) {
                if (order.at("user_id").get<std::string>() == user_id) {
                    order_ids.push_back(order_id);
                }
            }
            return ToolResult::success(Json{{"user_id", user_id}, {"order_ids", order_ids}});
        });

    registry.register_tool(
        ToolSpec{
            "find_user_by_email",
            ToolKind::read,
            {{"email", "string", true, "Email address on file."}},
            "{user_id}",
            {"user_id"},
            "Resolve a user id from an email address.",
        },
        [](const Json& args, EntityStore& store) {
            const std::string email = args.at("email").get<std::string>();
            for (const auto& [user_id, user] : store.collection("users")) {
                if (user.at("email").get<std::string>() == email) {
                    return ToolResult::success(Json{{"user_id", user_id}});
                }
            }
            return ToolResult::failure("no user with email: " + email);
        });

    // -- write tools -----------------------------------------------------

    registry.register_tool(
        ToolSpec{
            "cancel_order",
            ToolKind::write,
            {{"order_id", "string", true, "Identifier of the order to cancel."}},
            "{order_id, status, refund_amount}",
            {"order_id", "status", "refund_amount"},
            "Cancel an order that is not already cancelled or returned; issues a full refund.",
        },
        [](const Json& args, EntityStore& store) {
            const std::string order_id = args.at("order_id").get<std::string>();
            if (!detail::order_exists(store, order_id)) {
                return ToolResult::failure("order not found: " + order_id);
            }
            Json& order = store.entity_mut("orders", order_id);
            const std::string status = order.at("status").get<std::string>();
            if (status == "cancelled" || status == "return_requested") {
                return ToolResult::failure("order " + order_id + " cannot be cancelled from status " + status);
            }
            order["status"] = "cancelled";
            order["refund_amount"] = round_cents(order.at("total").get<double>());
            return ToolResult::success(Json{{"order_id", order_id},
                                            {"status", "cancelled"},
                                            {"refund_amount", order.at("refund_amount")}});
        });

    registry.register_tool(
        ToolSpec{
            "return_order",
            ToolKind::write,
            {{"order_id", "string", true, "Identifier of the delivered order to return."}},
            "{order_id, status, refund_amount}",
            {"order_id", "status", "refund_amount"},
            "Request a return for a delivered order; issues a full refund once processed.",
        },
        [](const Json& args, EntityStore& store) {
            const std::string order_id = args.at("order_id").get<std::string>();
            if (!detail::order_exists(store, order_id)) {
                return ToolResult::failure("order not found: " + order_id);
            }
            Json& order = store.entity_mut("orders", order_id);
            const std::string status = order.at("status").get<std::string>();
            if (status != "delivered") {
                return ToolResult::failure("order " + order_id + " is not delivered, cannot return");
            }
            order["status"] = "return_requested";
            order["refund_amount"] = round_cents(order.at("total").get<double>());
            return ToolResult::success(Json{{"order_id", order_id},
                                            {"status", "return_requested"},
                                            {"refund_amount", order.at("refund_amount")}});
        });

    registry.register_tool(
        ToolSpec{
            "exchange_item",
            ToolKind::write,
            {{"order_id", "string", true, "Order containing the item."},
             {"item_id", "string", true, "Line item to exchange."},
             {"new_product_id", "string", true, "Replacement product."}},
            "{order_id, item_id, product_id, total}",
            {"order_id", "item_id", "product_id", "total"},
            "Exchange one line item of a delivered order for a different catalog product; "
            "order total and product stock are adjusted.",
        },
        [](const Json& args, EntityStore& store) {
            const std::string order_id = args.at("order_id").get<std::string>();
            const std::string item_id = args.at("item_id").get<std::string>();
            const std::string new_product_id = args.at("new_product_id").get<std::string>();
            if (!detail::order_exists(store, order_id)) {
                return ToolResult::failure("order not found: " + order_id);
            }
            if (!store.has_entity("products", new_product_id)) {
                return ToolResult::failure("product not found: " + new_product_id);
            }
            Json& order = store.entity_mut("orders", order_id);
            if (order.at("status").get<std::string>() != "delivered") {
                return ToolResult::failure("order " + order_id + " is not delivered, cannot exchange items");
            }
            Json* line = nullptr;
            for (auto& item : order.at("items")) {
                if (item.at("item_id").get<std::string>() == item_id) {
                    line = &item;
                    break;
                }
            }
            if (line == nullptr) {
                return ToolResult::failure("item " + item_id + " not found on order " + order_id);
            }
            const std::string old_product_id = line->at("product_id").get<std::string>();
            if (old_product_id == new_product_id) {
                return ToolResult::failure("item " + item_id + " already is product " + new_product_id);
            }
            const auto quantity = line->at("quantity").get<std::int64_t>();
            Json& new_product = store.entity_mut("products", new_product_id);
            if (new_product.at("stock").get<std::int64_t>() < quantity) {
                return ToolResult::failure("insufficient stock for product " + new_product_id);
            }
            new_product["stock"] = new_product.at("stock").get<std::int64_t>() - quantity;
            Json& old_product = store.entity_mut("products", old_product_id);
            old_product["stock"] = old_product.at("stock").get<std::int64_t>() + quantity;
            (*line)["product_id"] = new_product_id;
            (*line)["name"] = new_product.at("name");
            (*line)["price"] = new_product.at("price");
            order["total"] = detail::order_total(order);
            return ToolResult::success(Json{{"order_id", order_id},
                                            {"item_id", item_id},
                                            {"product_id", new_product_id},
                                            {"total", order.at("total")}});
        });

    registry.register_tool(
        ToolSpec{
            "update_order_address",
            ToolKind::write,
            {{"order_id", "string", true, "Order to redirect."},
             {"address", "string", true, "New delivery address."}},
            "{order_id, address}",
            {"order_id", "address"},
            "Change the delivery address of an order that has not been delivered yet.",
        },
        [](const Json& args, EntityStore& store) {
            const std::string order_id = args.at("order_id").get<std::string>();
            if (!detail::order_exists(store, order_id)) {
                return ToolResult::failure("order not found: " + order_id);
            }
            Json& order = store.entity_mut("orders", order_id);
            const std::string status = order.at("status").get<std::string>();
            if (status != "pending" && status != "shipped") {
                return ToolResult::failure("order " + order_id + " can no longer be redirected (status " +
                                           status + ")");
            }
            order["address"] = args.at("address");
            return ToolResult::success(Json{{"order_id", order_id}, {"address", order.at("address")}});
        });

    registry.register_tool(
        ToolSpec{
            "update_user_email",
            ToolKind::write,
            {{"user_id", "string", true, "User whose email changes."},
             {"email", "string", true, "New email address."}},
            "{user_id, email}",
            {"user_id", "email"},
            "Update the email address on a user profile.",
        },
        [](const Json& args, EntityStore& store) {
            const std::string user_id = args.at("user_id").get<std::string>();
            const std::string email = args.at("email").get<std::string>();
            if (!store.has_entity("users", user_id)) {
                return ToolResult::failure("user not found: " + user_id);
            }
            if (email.find('@') == std::string::npos) {
                return ToolResult::failure("invalid email address: " + email);
            }
            store.entity_mut("users", user_id)["email"] = email;
            return ToolResult::success(Json{{"user_id", user_id}, {"email", email}});
        });
}

namespace detail {

inline std::optional<std::string> argument_order_id(const TraceEntry& entry) {
    if (entry.call.arguments.contains("order_id") && entry.call.arguments.at("order_id").is_string()) {
        return entry.call.arguments.at("order_id").get<std::string>();
    }
    return std::nullopt;
}

}  // namespace detail

inline std::vector<PolicyRule> policies() {
    std::vector<PolicyRule> rules;

    // An order must not be both cancelled and returned within one task,
    // no matter whether either call succeeded.
    rules.push_back(PolicyRule{
        "cancel_return_conflict",
        "An order must not be both cancelled and returned in the same task.",
        [](const Trace& trace, const EntityStore&, const EntityStore&) -> std::optional<std::string> {
            std::set<std::string> cancelled;
            std::set<std::string> returned;
            for (const auto& entry : trace) {
                auto order_id = detail::argument_order_id(entry);
                if (!order_id) continue;
                if (entry.call.name == "cancel_order") cancelled.insert(*order_id);
                if (entry.call.name == "return_order") returned.insert(*order_id);
            }
            for (const auto& order_id : cancelled) {
                if (returned.count(order_id)) {
                    return "order " + order_id + " is both cancelled and returned in this task";
                }
            }
            return std::nullopt;
        }});

    // Once an order reached a terminal state in this trace, later writes
    // against it act on a precondition a prior action destroyed.
    rules.push_back(PolicyRule{
        "modify_after_terminal",
        "After an order is cancelled or returned, no later action may modify that order.",
        [](const Trace& trace, const EntityStore&, const EntityStore&) -> std::optional<std::string> {
            std::set<std::string> terminal;
            for (const auto& entry : trace) {
                auto order_id = detail::argument_order_id(entry);
                if (!order_id) continue;
                const std::string& tool = entry.call.name;
                const bool is_write = tool == "cancel_order" || tool == "return_order" ||
                                      tool == "exchange_item" || tool == "update_order_address";
                if (is_write && terminal.count(*order_id)) {
                    return tool + " on order " + *order_id +
                           " follows a cancel/return of that order in the same task";
                }
                if ((tool == "cancel_order" || tool == "return_order") && entry.result.is_ok()) {
                    terminal.insert(*order_id);
                }
            }
            return std::nullopt;
        }});

    // Refund money actually issued is visible as the store-level increase
    // of refund_amount across all orders.
    rules.push_back(PolicyRule{
        "refund_limit",
        "Total refunds issued in a single task must not exceed $400.",
        [](const Trace&, const EntityStore& before, const EntityStore& after) -> std::optional<std::string> {
            double issued = 0.0;
            if (!after.has_collection("orders")) return std::nullopt;
            for (const auto& [order_id, order] : after.collection("orders")) {
                const double new_refund = order.value("refund_amount", 0.0);
                double old_refund = 0.0;
                if (before.has_entity("orders", order_id)) {
                    old_refund = before.entity("orders", order_id).value("refund_amount", 0.0);
                }
                if (new_refund > old_refund) issued += new_refund - old_refund;
            }
            if (issued > kRefundLimit) {
                std::ostringstream msg;
                msg << "refunds of $" << issued << " exceed the $" << kRefundLimit << " per-task limit";
                return msg.str();
            }
            return std::nullopt;
        }});

    return rules;
}

}  // namespace agentforge::retail
