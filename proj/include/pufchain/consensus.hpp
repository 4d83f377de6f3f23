#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <variant>
#include <vector>

#include "pufchain/bytes.hpp"
#include "pufchain/crypto.hpp"
#include "pufchain/ledger.hpp"
#include "pufchain/store.hpp"

namespace pufchain {

using Time = std::uint64_t;

// <sender, receiver, ts, body> signed by the sender.
struct NetworkMessage {
  NodeId sender;
  NodeId receiver;
  std::uint64_t ts = 0;
  Bytes body;
  Signature signature{};

  friend bool operator==(const NetworkMessage&, const NetworkMessage&) = default;
};

Bytes signing_payload(const NetworkMessage& m);
NetworkMessage make_message(const PartyIdentity& sender, NodeId receiver, std::uint64_t ts,
                            Bytes body);
bool message_authentic(const NetworkMessage& m, const Pki& pki);
void encode(ByteWriter& w, const NetworkMessage& m);
NetworkMessage decode_message(ByteReader& r);

// A slot is filled either by a transaction or by a no-op.
using Value = std::optional<Transaction>;
Digest value_digest(const Value& v);

struct RequestBody {
  Transaction txn;
};
// Proposal for view 0 of a slot; later views are proposed through NewView.
struct PrePrepareBody {
  std::uint64_t slot = 0;
  Value value;
};
struct PrepareBody {
  std::uint64_t slot = 0;
  std::uint64_t view = 0;
  Digest digest{};
};
struct CommitBody {
  std::uint64_t slot = 0;
  std::uint64_t view = 0;
  Digest digest{};
  Value value;
};
// Proof that `value` gathered a prepare quorum in `view`: the signed
// Prepare messages the holder received.
struct PreparedCertificate {
  std::uint64_t view = 0;
  Value value;
  std::vector<NetworkMessage> prepares;
};
struct ViewChangeBody {
  std::uint64_t slot = 0;
  std::uint64_t new_view = 0;
  std::optional<PreparedCertificate> prepared;
};
struct NewViewBody {
  std::uint64_t slot = 0;
  std::uint64_t view = 0;
  std::vector<NetworkMessage> view_changes;
  Value value;
};

// Catch-up for a lagging replica: the commit quorum the sender decided on.
struct DecisionBody {
  std::uint64_t slot = 0;
  std::vector<NetworkMessage> commits;
};

using Body = std::variant<RequestBody, PrePrepareBody, PrepareBody, CommitBody, ViewChangeBody,
                          NewViewBody, DecisionBody>;

Bytes encode_body(const Body& body);
Body decode_body(std::span<const std::uint8_t> bytes);  // throws DecodeError

std::size_t max_faulty(std::size_t nodes);  // floor((N-1)/3)
// Quorum ceil((N+f+1)/2): any two quorums share at least f+1 nodes, hence
// at least one honest node. Equals 2f+1 when N = 3f+1.
std::size_t quorum_size(std::size_t nodes);

struct TimerRequest {
  Time at = 0;
  std::uint64_t slot = 0;
  std::uint64_t view = 0;
};

struct Outgoing {
  NetworkMessage message;
  Time extra_delay = 0;
};

struct Outbox {
  std::vector<Outgoing> messages;
  std::vector<TimerRequest> timers;
};

struct ReplicaConfig {
  Time base_timeout = 80;
  TransactionValidator validator;
};

struct ReplicaCounters {
  std::uint64_t bad_signature = 0;
  std::uint64_t replayed = 0;
  std::uint64_t malformed = 0;
  std::uint64_t misaddressed = 0;
  std::uint64_t invalid_value = 0;
  std::uint64_t view_changes = 0;
};

class Replica;

// A consortium member as seen by the network simulation.
class ConsensusNode {
 public:
  virtual ~ConsensusNode() = default;

  virtual NodeId id() const = 0;
  virtual bool honest() const = 0;
  virtual void on_message(const NetworkMessage& m, Time now, Outbox& out) = 0;
  virtual void on_timer(const TimerRequest& t, Time now, Outbox& out) = 0;
  // Request broadcast issued by the client co-located with this node.
  virtual std::vector<NetworkMessage> client_broadcast(const Transaction& txn) = 0;
  virtual const Replica& state() const = 0;
};

// Honest replica of the simplified PBFT-style protocol. Slots are decided
// one at a time; slot s in view v is led by node (s + v) mod N. View 0 runs
// pre-prepare/prepare/commit; a timeout moves the slot to the next view via
// ViewChange/NewView carrying prepared certificates, so a decided value
// survives leader rotation.
class Replica : public ConsensusNode {
 public:
  Replica(PartyIdentity identity, const Pki& pki, std::size_t nodes, ReplicaConfig config);

  NodeId id() const override { return identity_.id(); }
  bool honest() const override { return true; }
  void on_message(const NetworkMessage& m, Time now, Outbox& out) override;
  void on_timer(const TimerRequest& t, Time now, Outbox& out) override;
  std::vector<NetworkMessage> client_broadcast(const Transaction& txn) override;
  const Replica& state() const override { return *this; }

  const WriteOnceStore& store() const { return store_; }
  const LedgerLog& log() const { return log_; }
  std::optional<ApplyOutcome> outcome_of(const Digest& txn_id) const;
  std::uint64_t active_slot() const { return slot_; }
  std::uint64_t view() const { return view_; }
  std::size_t pending() const { return pending_.size(); }
  const ReplicaCounters& counters() const { return counters_; }

  NodeId leader(std::uint64_t slot, std::uint64_t view) const;

  // Signs a body for every node (including this one) with fresh timestamps.
  std::vector<NetworkMessage> broadcast(const Body& body);
  NetworkMessage sign_for(NodeId receiver, Bytes body);

 private:
  struct SlotState {
    std::map<std::uint64_t, Digest> accepted;  // view -> proposal digest
    std::map<Digest, Value> values;
    std::map<std::pair<std::uint64_t, Digest>, std::map<NodeId, NetworkMessage>> prepares;
    std::map<std::pair<std::uint64_t, Digest>, std::map<NodeId, NetworkMessage>> commits;
    std::set<std::uint64_t> commit_sent;
    std::optional<PreparedCertificate> prepared;
    std::map<std::uint64_t, std::map<NodeId, NetworkMessage>> view_changes;
    std::set<std::uint64_t> new_view_sent;
    bool proposed = false;
  };

  void process(const NetworkMessage& m, const Body& body, Time now, Outbox& out);
  void on_request(const Transaction& txn, Time now, Outbox& out);
  void on_pre_prepare(const NetworkMessage& m, const PrePrepareBody& b, Time now, Outbox& out);
  void on_prepare(const NetworkMessage& m, const PrepareBody& b, Time now, Outbox& out);
  void on_commit(const NetworkMessage& m, const CommitBody& b, Time now, Outbox& out);
  void on_view_change(const NetworkMessage& m, const ViewChangeBody& b, Time now, Outbox& out);
  void on_new_view(const NetworkMessage& m, const NewViewBody& b, Time now, Outbox& out);
  void on_decision(const NetworkMessage& m, const DecisionBody& b, Time now, Outbox& out);
  void send_decision(std::uint64_t slot, NodeId to, Outbox& out);

  bool value_valid(const Value& v) const;
  bool certificate_valid(const PreparedCertificate& cert, NodeId holder, std::uint64_t slot,
                         std::uint64_t below_view) const;
  std::optional<ViewChangeBody> checked_view_change(const NetworkMessage& m, std::uint64_t slot,
                                                    std::uint64_t view, NodeId addressed_to) const;
  Value choose_new_view_value(const std::vector<ViewChangeBody>& vcs) const;

  void accept_proposal(std::uint64_t view, const Value& value, Time now, Outbox& out);
  void check_prepared(Time now, Outbox& out);
  void maybe_propose(Time now, Outbox& out);
  void start_view_change(std::uint64_t new_view, Time now, Outbox& out);
  void maybe_send_new_view(Time now, Outbox& out);
  void decide(const Value& value, std::uint64_t view,
              const std::map<NodeId, NetworkMessage>& quorum, Time now, Outbox& out);
  void arm_timer(Time now, Outbox& out);
  void send_all(const Body& body, Outbox& out);
  std::optional<Transaction> first_pending() const;

  PartyIdentity identity_;
  const Pki& pki_;
  std::size_t n_;
  std::size_t f_;
  std::size_t q_;
  ReplicaConfig config_;

  std::uint64_t next_ts_ = 0;
  std::map<NodeId, std::set<std::uint64_t>> seen_;
  ReplicaCounters counters_;

  std::uint64_t arrival_ = 0;
  std::map<std::uint64_t, Transaction> pending_;
  std::map<Digest, std::uint64_t> pending_index_;
  std::map<Digest, std::size_t> executed_;

  WriteOnceStore store_;
  LedgerLog log_;

  std::uint64_t slot_ = 0;
  std::uint64_t view_ = 0;
  bool in_view_change_ = false;
  std::optional<std::pair<std::uint64_t, std::uint64_t>> timer_armed_;
  SlotState cur_;
  std::map<std::uint64_t, std::vector<NetworkMessage>> future_;
  std::map<std::uint64_t, std::vector<NetworkMessage>> decided_;  // slot -> commit quorum
};

}  // namespace pufchain
