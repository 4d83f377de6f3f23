#include "pufchain/consensus.hpp"

#include <algorithm>

namespace pufchain {
namespace {

enum BodyTag : std::uint8_t {
  kRequest = 1,
  kPrePrepare = 2,
  kPrepare = 3,
  kCommit = 4,
  kViewChange = 5,
  kNewView = 6,
  kDecision = 7,
};

void encode_value(ByteWriter& w, const Value& v) {
  w.u8(v ? 1 : 0);
  if (v) encode(w, *v);
}

Value decode_value(ByteReader& r) {
  const auto present = r.u8();
  if (present > 1) throw DecodeError("bad value flag");
  if (!present) return std::nullopt;
  return decode_transaction(r);
}

void encode_messages(ByteWriter& w, const std::vector<NetworkMessage>& ms) {
  w.u32(static_cast<std::uint32_t>(ms.size()));
  for (const auto& m : ms) encode(w, m);
}

std::vector<NetworkMessage> decode_messages(ByteReader& r) {
  const auto n = r.u32();
  if (n > 4096) throw DecodeError("implausible message count");
  std::vector<NetworkMessage> out;
  out.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(decode_message(r));
  return out;
}

std::uint64_t slot_of(const Body& body) {
  return std::visit(
      [](const auto& b) -> std::uint64_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(b)>, RequestBody>) {
          return 0;
        } else {
          return b.slot;
        }
      },
      body);
}

}  // namespace

Bytes signing_payload(const NetworkMessage& m) {
  ByteWriter w;
  w.u32(m.sender.index).u32(m.receiver.index).u64(m.ts).bytes(m.body);
  return w.take();
}

NetworkMessage make_message(const PartyIdentity& sender, NodeId receiver, std::uint64_t ts,
                            Bytes body) {
  NetworkMessage m{sender.id(), receiver, ts, std::move(body), {}};
  m.signature = sender.sign_bytes(signing_payload(m));
  return m;
}

bool message_authentic(const NetworkMessage& m, const Pki& pki) {
  return pki.verify(signing_payload(m), m.sender, m.signature);
}

void encode(ByteWriter& w, const NetworkMessage& m) {
  w.u32(m.sender.index).u32(m.receiver.index).u64(m.ts).bytes(m.body).fixed(m.signature);
}

NetworkMessage decode_message(ByteReader& r) {
  NetworkMessage m;
  m.sender.index = r.u32();
  m.receiver.index = r.u32();
  m.ts = r.u64();
  m.body = r.bytes();
  m.signature = r.fixed<32>();
  return m;
}

Digest value_digest(const Value& v) {
  if (!v) {
    static const Digest noop = digest(to_bytes("pufchain-noop"));
    return noop;
  }
  return transaction_id(*v);
}

Bytes encode_body(const Body& body) {
  ByteWriter w;
  std::visit(
      [&w](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, RequestBody>) {
          w.u8(kRequest);
          encode(w, b.txn);
        } else if constexpr (std::is_same_v<T, PrePrepareBody>) {
          w.u8(kPrePrepare).u64(b.slot);
          encode_value(w, b.value);
        } else if constexpr (std::is_same_v<T, PrepareBody>) {
          w.u8(kPrepare).u64(b.slot).u64(b.view).fixed(b.digest);
        } else if constexpr (std::is_same_v<T, CommitBody>) {
          w.u8(kCommit).u64(b.slot).u64(b.view).fixed(b.digest);
          encode_value(w, b.value);
        } else if constexpr (std::is_same_v<T, ViewChangeBody>) {
          w.u8(kViewChange).u64(b.slot).u64(b.new_view).u8(b.prepared ? 1 : 0);
          if (b.prepared) {
            w.u64(b.prepared->view);
            encode_value(w, b.prepared->value);
            encode_messages(w, b.prepared->prepares);
          }
        } else if constexpr (std::is_same_v<T, NewViewBody>) {
          w.u8(kNewView).u64(b.slot).u64(b.view);
          encode_messages(w, b.view_changes);
          encode_value(w, b.value);
        } else {
          w.u8(kDecision).u64(b.slot);
          encode_messages(w, b.commits);
        }
      },
      body);
  return w.take();
}

Body decode_body(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Body out;
  switch (r.u8()) {
    case kRequest:
      out = RequestBody{decode_transaction(r)};
      break;
    case kPrePrepare: {
      PrePrepareBody b;
      b.slot = r.u64();
      b.value = decode_value(r);
      out = std::move(b);
      break;
    }
    case kPrepare: {
      PrepareBody b;
      b.slot = r.u64();
      b.view = r.u64();
      b.digest = r.fixed<32>();
      out = b;
      break;
    }
    case kCommit: {
      CommitBody b;
      b.slot = r.u64();
      b.view = r.u64();
      b.digest = r.fixed<32>();
      b.value = decode_value(r);
      out = std::move(b);
      break;
    }
    case kViewChange: {
      ViewChangeBody b;
      b.slot = r.u64();
      b.new_view = r.u64();
      const auto has_cert = r.u8();
      if (has_cert > 1) throw DecodeError("bad certificate flag");
      if (has_cert) {
        PreparedCertificate cert;
        cert.view = r.u64();
        cert.value = decode_value(r);
        cert.prepares = decode_messages(r);
        b.prepared = std::move(cert);
      }
      out = std::move(b);
      break;
    }
    case kNewView: {
      NewViewBody b;
      b.slot = r.u64();
      b.view = r.u64();
      b.view_changes = decode_messages(r);
      b.value = decode_value(r);
      out = std::move(b);
      break;
    }
    case kDecision: {
      DecisionBody b;
      b.slot = r.u64();
      b.commits = decode_messages(r);
      out = std::move(b);
      break;
    }
    default:
      throw DecodeError("unknown body tag");
  }
  r.expect_done();
  return out;
}

std::size_t max_faulty(std::size_t nodes) { return nodes == 0 ? 0 : (nodes - 1) / 3; }

std::size_t quorum_size(std::size_t nodes) { return (nodes + max_faulty(nodes) + 2) / 2; }

Replica::Replica(PartyIdentity identity, const Pki& pki, std::size_t nodes, ReplicaConfig config)
    : identity_(std::move(identity)),
      pki_(pki),
      n_(nodes),
      f_(max_faulty(nodes)),
      q_(quorum_size(nodes)),
      config_(std::move(config)) {}

NodeId Replica::leader(std::uint64_t slot, std::uint64_t view) const {
  return NodeId{static_cast<std::uint32_t>((slot + view) % n_)};
}

NetworkMessage Replica::sign_for(NodeId receiver, Bytes body) {
  return make_message(identity_, receiver, next_ts_++, std::move(body));
}

std::vector<NetworkMessage> Replica::broadcast(const Body& body) {
  const auto bytes = encode_body(body);
  std::vector<NetworkMessage> out;
  out.reserve(n_);
  for (std::size_t j = 0; j < n_; ++j) out.push_back(sign_for(NodeId{static_cast<std::uint32_t>(j)}, bytes));
  return out;
}

std::vector<NetworkMessage> Replica::client_broadcast(const Transaction& txn) {
  return broadcast(RequestBody{txn});
}

void Replica::send_all(const Body& body, Outbox& out) {
  for (auto& m : broadcast(body)) out.messages.push_back({std::move(m), 0});
}

std::optional<ApplyOutcome> Replica::outcome_of(const Digest& txn_id) const {
  auto it = executed_.find(txn_id);
  if (it == executed_.end()) return std::nullopt;
  return log_[it->second].outcome;
}

std::optional<Transaction> Replica::first_pending() const {
  if (pending_.empty()) return std::nullopt;
  return pending_.begin()->second;
}

bool Replica::value_valid(const Value& v) const { return !v || signatures_valid(*v, pki_); }

void Replica::on_message(const NetworkMessage& m, Time now, Outbox& out) {
  if (m.receiver != id() || m.sender.index >= n_) {
    ++counters_.misaddressed;
    return;
  }
  if (!message_authentic(m, pki_)) {
    ++counters_.bad_signature;
    return;
  }
  if (!seen_[m.sender].insert(m.ts).second) {
    ++counters_.replayed;
    return;
  }
  Body body;
  try {
    body = decode_body(m.body);
  } catch (const DecodeError&) {
    ++counters_.malformed;
    return;
  }
  process(m, body, now, out);
}

void Replica::process(const NetworkMessage& m, const Body& body, Time now, Outbox& out) {
  if (const auto* req = std::get_if<RequestBody>(&body)) {
    on_request(req->txn, now, out);
    return;
  }
  const auto slot = slot_of(body);
  if (slot < slot_) {
    if (std::holds_alternative<ViewChangeBody>(body)) send_decision(slot, m.sender, out);
    return;
  }
  if (slot > slot_) {
    future_[slot].push_back(m);
    arm_timer(now, out);
    return;
  }
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, PrePrepareBody>) {
          on_pre_prepare(m, b, now, out);
        } else if constexpr (std::is_same_v<T, PrepareBody>) {
          on_prepare(m, b, now, out);
        } else if constexpr (std::is_same_v<T, CommitBody>) {
          on_commit(m, b, now, out);
        } else if constexpr (std::is_same_v<T, ViewChangeBody>) {
          on_view_change(m, b, now, out);
        } else if constexpr (std::is_same_v<T, NewViewBody>) {
          on_new_view(m, b, now, out);
        } else if constexpr (std::is_same_v<T, DecisionBody>) {
          on_decision(m, b, now, out);
        }
      },
      body);
}

void Replica::on_request(const Transaction& txn, Time now, Outbox& out) {
  if (!signatures_valid(txn, pki_)) {
    ++counters_.invalid_value;
    return;
  }
  const auto tid = transaction_id(txn);
  if (executed_.count(tid) || pending_index_.count(tid)) return;
  pending_index_[tid] = arrival_;
  pending_[arrival_++] = txn;
  maybe_propose(now, out);
  arm_timer(now, out);
}

void Replica::maybe_propose(Time now, Outbox& out) {
  if (in_view_change_ || view_ != 0 || cur_.proposed || leader(slot_, 0) != id()) return;
  auto value = first_pending();
  if (!value) return;
  cur_.proposed = true;
  send_all(PrePrepareBody{slot_, std::move(value)}, out);
  arm_timer(now, out);
}

void Replica::on_pre_prepare(const NetworkMessage& m, const PrePrepareBody& b, Time now,
                             Outbox& out) {
  if (m.sender != leader(slot_, 0)) return;
  if (!value_valid(b.value)) {
    ++counters_.invalid_value;
    return;
  }
  cur_.values.emplace(value_digest(b.value), b.value);
  if (view_ != 0 || in_view_change_ || cur_.accepted.count(0)) return;
  accept_proposal(0, b.value, now, out);
}

void Replica::accept_proposal(std::uint64_t view, const Value& value, Time now, Outbox& out) {
  const auto d = value_digest(value);
  cur_.accepted[view] = d;
  cur_.values[d] = value;
  send_all(PrepareBody{slot_, view, d}, out);
  arm_timer(now, out);
  check_prepared(now, out);
}

void Replica::on_prepare(const NetworkMessage& m, const PrepareBody& b, Time now, Outbox& out) {
  cur_.prepares[{b.view, b.digest}].emplace(m.sender, m);
  check_prepared(now, out);
}

void Replica::check_prepared(Time /*now*/, Outbox& out) {
  if (in_view_change_) return;
  auto acc = cur_.accepted.find(view_);
  if (acc == cur_.accepted.end() || cur_.commit_sent.count(view_)) return;
  const auto& d = acc->second;
  auto votes = cur_.prepares.find({view_, d});
  if (votes == cur_.prepares.end() || votes->second.size() < q_) return;

  PreparedCertificate cert;
  cert.view = view_;
  cert.value = cur_.values.at(d);
  for (const auto& [sender, msg] : votes->second) cert.prepares.push_back(msg);
  cur_.prepared = std::move(cert);
  cur_.commit_sent.insert(view_);
  send_all(CommitBody{slot_, view_, d, cur_.values.at(d)}, out);
}

void Replica::on_commit(const NetworkMessage& m, const CommitBody& b, Time now, Outbox& out) {
  if (value_digest(b.value) != b.digest || !value_valid(b.value)) {
    ++counters_.invalid_value;
    return;
  }
  cur_.values.emplace(b.digest, b.value);
  auto& voters = cur_.commits[{b.view, b.digest}];
  voters.emplace(m.sender, m);
  if (voters.size() >= q_) {
    const auto quorum = voters;
    decide(cur_.values.at(b.digest), b.view, quorum, now, out);
  }
}

void Replica::decide(const Value& value, std::uint64_t view,
                     const std::map<NodeId, NetworkMessage>& quorum, Time now, Outbox& out) {
  std::vector<PartyId> signers;
  auto& proof = decided_[slot_];
  for (const auto& [sender, msg] : quorum) {
    signers.push_back(sender);
    proof.push_back(msg);
  }
  if (value) {
    const auto tid = transaction_id(*value);
    if (!executed_.count(tid)) {
      const auto outcome = apply_transaction(store_, *value, pki_, config_.validator);
      log_.push_back(CommittedEntry{slot_, view, *value, outcome, std::move(signers)});
      executed_[tid] = log_.size() - 1;
    }
    if (auto it = pending_index_.find(tid); it != pending_index_.end()) {
      pending_.erase(it->second);
      pending_index_.erase(it);
    }
  }

  ++slot_;
  view_ = 0;
  in_view_change_ = false;
  timer_armed_.reset();
  cur_ = SlotState{};

  if (auto buffered = future_.extract(slot_)) {
    const auto this_slot = slot_;
    for (const auto& msg : buffered.mapped()) {
      if (slot_ != this_slot) break;
      process(msg, decode_body(msg.body), now, out);
    }
  }
  maybe_propose(now, out);
  arm_timer(now, out);
}

void Replica::send_decision(std::uint64_t slot, NodeId to, Outbox& out) {
  auto it = decided_.find(slot);
  if (it == decided_.end()) return;
  out.messages.push_back({sign_for(to, encode_body(DecisionBody{slot, it->second})), 0});
}

void Replica::on_decision(const NetworkMessage& m, const DecisionBody& b, Time now, Outbox& out) {
  std::optional<std::pair<std::uint64_t, Digest>> target;
  std::map<NodeId, NetworkMessage> quorum;
  Value value;
  for (const auto& c : b.commits) {
    if (c.receiver != m.sender || c.sender.index >= n_ || !message_authentic(c, pki_)) {
      ++counters_.invalid_value;
      return;
    }
    Body body;
    try {
      body = decode_body(c.body);
    } catch (const DecodeError&) {
      ++counters_.invalid_value;
      return;
    }
    const auto* commit = std::get_if<CommitBody>(&body);
    if (!commit || commit->slot != b.slot || value_digest(commit->value) != commit->digest ||
        !value_valid(commit->value)) {
      ++counters_.invalid_value;
      return;
    }
    const std::pair key{commit->view, commit->digest};
    if (target && *target != key) {
      ++counters_.invalid_value;
      return;
    }
    target = key;
    value = commit->value;
    quorum.emplace(c.sender, c);
  }
  if (!target || quorum.size() < q_) {
    ++counters_.invalid_value;
    return;
  }
  decide(value, target->first, quorum, now, out);
}

void Replica::arm_timer(Time now, Outbox& out) {
  if (timer_armed_ && *timer_armed_ == std::pair{slot_, view_}) return;
  if (pending_.empty() && cur_.accepted.empty() && !in_view_change_ && future_.empty()) return;
  timer_armed_ = std::pair{slot_, view_};
  const auto timeout = config_.base_timeout << std::min<std::uint64_t>(view_, 12);
  out.timers.push_back({now + timeout, slot_, view_});
}

void Replica::on_timer(const TimerRequest& t, Time now, Outbox& out) {
  if (t.slot != slot_ || t.view != view_) return;
  if (!timer_armed_ || *timer_armed_ != std::pair{t.slot, t.view}) return;
  timer_armed_.reset();
  start_view_change(view_ + 1, now, out);
}

void Replica::start_view_change(std::uint64_t new_view, Time now, Outbox& out) {
  ++counters_.view_changes;
  view_ = new_view;
  in_view_change_ = true;
  timer_armed_.reset();
  send_all(ViewChangeBody{slot_, new_view, cur_.prepared}, out);
  arm_timer(now, out);
  maybe_send_new_view(now, out);
}

bool Replica::certificate_valid(const PreparedCertificate& cert, NodeId holder,
                                std::uint64_t slot, std::uint64_t below_view) const {
  if (cert.view >= below_view || !value_valid(cert.value)) return false;
  const auto d = value_digest(cert.value);
  std::set<NodeId> senders;
  for (const auto& p : cert.prepares) {
    if (p.receiver != holder || !message_authentic(p, pki_)) return false;
    Body body;
    try {
      body = decode_body(p.body);
    } catch (const DecodeError&) {
      return false;
    }
    const auto* prep = std::get_if<PrepareBody>(&body);
    if (!prep || prep->slot != slot || prep->view != cert.view || prep->digest != d) return false;
    senders.insert(p.sender);
  }
  return senders.size() >= q_;
}

std::optional<ViewChangeBody> Replica::checked_view_change(const NetworkMessage& m,
                                                           std::uint64_t slot,
                                                           std::uint64_t view,
                                                           NodeId addressed_to) const {
  if (m.receiver != addressed_to || m.sender.index >= n_ || !message_authentic(m, pki_))
    return std::nullopt;
  Body body;
  try {
    body = decode_body(m.body);
  } catch (const DecodeError&) {
    return std::nullopt;
  }
  const auto* vc = std::get_if<ViewChangeBody>(&body);
  if (!vc || vc->slot != slot || vc->new_view != view) return std::nullopt;
  if (vc->prepared && !certificate_valid(*vc->prepared, m.sender, slot, view)) return std::nullopt;
  return *vc;
}

void Replica::on_view_change(const NetworkMessage& m, const ViewChangeBody& b, Time now,
                             Outbox& out) {
  if (b.new_view == 0) return;
  if (b.prepared && !certificate_valid(*b.prepared, m.sender, slot_, b.new_view)) {
    ++counters_.invalid_value;
    return;
  }
  cur_.view_changes[b.new_view].emplace(m.sender, m);

  // Join a view change once f+1 nodes ask for a view above ours.
  if (b.new_view > view_) {
    std::map<NodeId, std::uint64_t> lowest_above;
    for (auto it = cur_.view_changes.upper_bound(view_); it != cur_.view_changes.end(); ++it) {
      for (const auto& [sender, msg] : it->second) lowest_above.emplace(sender, it->first);
    }
    if (lowest_above.size() >= f_ + 1) {
      std::uint64_t target = ~std::uint64_t{0};
      for (const auto& [sender, v] : lowest_above) target = std::min(target, v);
      start_view_change(target, now, out);
      return;
    }
  }
  maybe_send_new_view(now, out);
}

Value Replica::choose_new_view_value(const std::vector<ViewChangeBody>& vcs) const {
  const PreparedCertificate* best = nullptr;
  for (const auto& vc : vcs) {
    if (vc.prepared && (!best || vc.prepared->view > best->view)) best = &*vc.prepared;
  }
  if (best) return best->value;
  return first_pending();
}

void Replica::maybe_send_new_view(Time /*now*/, Outbox& out) {
  if (!in_view_change_ || view_ == 0 || leader(slot_, view_) != id()) return;
  if (cur_.new_view_sent.count(view_)) return;
  auto it = cur_.view_changes.find(view_);
  if (it == cur_.view_changes.end() || it->second.size() < q_) return;

  NewViewBody nv;
  nv.slot = slot_;
  nv.view = view_;
  std::vector<ViewChangeBody> bodies;
  for (const auto& [sender, msg] : it->second) {
    if (nv.view_changes.size() == q_) break;
    nv.view_changes.push_back(msg);
    bodies.push_back(std::get<ViewChangeBody>(decode_body(msg.body)));
  }
  nv.value = choose_new_view_value(bodies);
  cur_.new_view_sent.insert(view_);
  send_all(nv, out);
}

void Replica::on_new_view(const NetworkMessage& m, const NewViewBody& b, Time now, Outbox& out) {
  if (b.view == 0 || b.view < view_ || m.sender != leader(slot_, b.view)) return;
  if (cur_.accepted.count(b.view)) return;

  std::set<NodeId> senders;
  std::vector<ViewChangeBody> bodies;
  for (const auto& vc : b.view_changes) {
    auto body = checked_view_change(vc, slot_, b.view, m.sender);
    if (!body || !senders.insert(vc.sender).second) {
      ++counters_.invalid_value;
      return;
    }
    bodies.push_back(std::move(*body));
  }
  if (senders.size() < q_ || !value_valid(b.value)) {
    ++counters_.invalid_value;
    return;
  }
  const PreparedCertificate* best = nullptr;
  for (const auto& vc : bodies) {
    if (vc.prepared && (!best || vc.prepared->view > best->view)) best = &*vc.prepared;
  }
  if (best && value_digest(best->value) != value_digest(b.value)) {
    ++counters_.invalid_value;
    return;
  }

  view_ = b.view;
  in_view_change_ = false;
  timer_armed_.reset();
  accept_proposal(b.view, b.value, now, out);
}

}  // namespace pufchain
