#include "onlay/node.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace onlay {

const char* to_string(NodeErrc code) {
   switch (code) {
   case NodeErrc::NotEnoughPeers: return "NotEnoughPeers";
   case NodeErrc::UnknownTransaction: return "UnknownTransaction";
   case NodeErrc::IncompleteCoverage: return "IncompleteCoverage";
   }
   return "?";
}

const char* to_string(Behavior b) {
   switch (b) {
   case Behavior::Honest: return "honest";
   case Behavior::Forker: return "forker";
   case Behavior::Equivocator: return "equivocator";
   case Behavior::Silent: return "silent";
   }
   return "?";
}

const char* to_string(Strategy s) {
   switch (s) {
   case Strategy::Random: return "random";
   case Strategy::LeastUsed: return "least";
   case Strategy::MostUsed: return "most";
   case Strategy::Fair: return "fair";
   case Strategy::Smart: return "smart";
   }
   return "?";
}

std::optional<Behavior> parse_behavior(std::string_view s) {
   for (auto b : {Behavior::Honest, Behavior::Forker, Behavior::Equivocator, Behavior::Silent})
      if (s == to_string(b))
         return b;
   return std::nullopt;
}

std::optional<Strategy> parse_strategy(std::string_view s) {
   for (auto v : {Strategy::Random, Strategy::LeastUsed, Strategy::MostUsed, Strategy::Fair, Strategy::Smart})
      if (s == to_string(v))
         return v;
   return std::nullopt;
}

const char* to_string(Stage s) {
   switch (s) {
   case Stage::Submitted: return "Submitted";
   case Stage::Batched: return "Batched";
   case Stage::RootConfirmed: return "RootConfirmed";
   case Stage::ClothoConfirmed: return "ClothoConfirmed";
   case Stage::Finalized: return "Finalized";
   }
   return "?";
}

const char* kind_name(const MessageBody& body) {
   static const char* names[] = {"SyncRequest", "SyncResponse", "Broadcast", "ForkNotice"};
   return names[body.index()];
}

std::string summary(const MessageBody& body) {
   std::ostringstream out;
   std::visit(
      [&](const auto& m) {
         using T = std::decay_t<decltype(m)>;
         if constexpr (std::is_same_v<T, SyncRequest>) {
            out << "known=";
            bool first = true;
            for (const auto& [c, count] : m.known) {
               out << (first ? "" : ",") << c.value << ":" << count;
               first = false;
            }
            if (first)
               out << "-";
            out << " wanted=" << m.wanted.size();
         } else if constexpr (std::is_same_v<T, SyncResponse>) {
            out << "events=" << m.events.size();
         } else if constexpr (std::is_same_v<T, Broadcast>) {
            out << m.event.label() << "/" << m.event.id.short_hex();
         } else {
            out << m.first.id.short_hex() << "|" << m.second.id.short_hex();
         }
      },
      body);
   return out.str();
}

namespace {
enum : std::uint64_t { kPeerStream = 1, kForkStream = 2 };

void put_u64(Bytes& out, std::uint64_t v) {
   for (int shift = 56; shift >= 0; shift -= 8)
      out.push_back(static_cast<std::uint8_t>(v >> shift));
}
} // namespace

Node::Node(NodeConfig cfg) : cfg_(cfg), roots_(cfg.n), finality_(cfg.n, cfg.clotho_gap) {
   if (cfg_.algo == LayeringAlgo::OCg && cfg_.cg_width == 0)
      cfg_.cg_width = max_width_ceil({cfg_.n, cfg_.w_p, cfg_.w_c});
}

std::vector<NodeId> Node::select_peers(std::size_t count, std::uint64_t step_no) {
   std::vector<NodeId> peers;
   for (std::uint32_t i = 0; i < cfg_.n; ++i)
      if (NodeId{i} != cfg_.id)
         peers.push_back(NodeId{i});
   if (cfg_.n < 2 || count > peers.size())
      throw NodeError(NodeErrc::NotEnoughPeers,
                      "need " + std::to_string(count) + " peers, have " + std::to_string(peers.size()));
   auto syncs = [&](NodeId p) { return stats_[p].syncs; };
   switch (cfg_.strategy) {
   case Strategy::Random: {
      Rng rng(derive_seed(cfg_.seed, {cfg_.id.value, step_no, kPeerStream}));
      for (std::size_t i = 0; i < count; ++i)
         std::swap(peers[i], peers[i + rng.below(peers.size() - i)]);
      break;
   }
   case Strategy::LeastUsed:
      std::stable_sort(peers.begin(), peers.end(), [&](NodeId a, NodeId b) { return syncs(a) < syncs(b); });
      break;
   case Strategy::MostUsed:
      std::stable_sort(peers.begin(), peers.end(), [&](NodeId a, NodeId b) { return syncs(a) > syncs(b); });
      break;
   case Strategy::Fair: {
      // Rotating window: every peer is chosen equally often, counts never differ by more than one round.
      std::size_t start = (step_no * count) % peers.size();
      std::rotate(peers.begin(), peers.begin() + static_cast<std::ptrdiff_t>(start), peers.end());
      break;
   }
   case Strategy::Smart:
      std::stable_sort(peers.begin(), peers.end(), [&](NodeId a, NodeId b) {
         const auto& x = stats_[a];
         const auto& y = stats_[b];
         return x.received * std::max<std::uint64_t>(1, y.syncs) > y.received * std::max<std::uint64_t>(1, x.syncs);
      });
      break;
   }
   peers.resize(count);
   return peers;
}

EventBlock Node::create_event(const std::vector<EventId>& peer_tops, Bytes payload) {
   std::optional<EventId> self;
   std::uint64_t          lamport = 0, seq = 0;
   std::vector<EventId>   refs;
   if (own_tip_) {
      const auto& tip = chain_.event(*own_tip_);
      self            = tip.id;
      seq             = tip.seq + 1;
      lamport         = tip.lamport;
      std::set<NodeId> seen{cfg_.id};
      for (const auto& id : peer_tops) {
         const auto& p = chain_.at(id);
         if (!seen.insert(p.creator).second)
            continue;
         refs.push_back(id);
         lamport = std::max(lamport, p.lamport);
      }
      ++lamport;
   }
   auto e   = make_event(cfg_.id, self, std::move(refs), lamport, std::move(payload), seq);
   own_tip_ = chain_.insert(e);
   IngestReport ignored;
   on_inserted(*own_tip_, ignored);
   return e;
}

std::vector<EventBlock> Node::handle_sync_request(const SyncRequest& req) const {
   auto                events = chain_.diff_events(req.known);
   std::set<EventId>   have;
   for (const auto& e : events)
      have.insert(e.id);
   for (const auto& id : req.wanted)
      if (chain_.contains(id) && have.insert(id).second)
         events.push_back(chain_.at(id));
   std::sort(events.begin(), events.end(),
             [](const EventBlock& a, const EventBlock& b) { return lamport_key(a) < lamport_key(b); });
   return events;
}

IngestReport Node::ingest_events(std::vector<EventBlock> events) {
   IngestReport report;
   std::sort(events.begin(), events.end(),
             [](const EventBlock& a, const EventBlock& b) { return lamport_key(a) < lamport_key(b); });
   events.erase(std::unique(events.begin(), events.end(),
                            [](const EventBlock& a, const EventBlock& b) { return a.id == b.id; }),
                events.end());

   auto try_insert = [&](const EventBlock& e) -> bool {
      try {
         Index i = chain_.insert(e);
         ++report.inserted;
         on_inserted(i, report);
         return true;
      } catch (const ChainError& ex) {
         if (ex.code() == ChainErrc::MissingRef)
            return false;
         report.errors.push_back(e.id.short_hex() + " " + ex.what());
         return true; // invalid, drop it
      }
   };

   for (auto& e : events) {
      auto key = lamport_key(e);
      if (chain_.contains(e.id) || pending_.contains(key)) {
         ++report.duplicates;
         continue;
      }
      if (!try_insert(e)) {
         pending_.emplace(key, std::move(e));
         ++report.buffered;
      }
   }
   for (bool progress = true; progress && !pending_.empty();) {
      progress = false;
      for (auto it = pending_.begin(); it != pending_.end();) {
         auto refs  = it->second.refs();
         bool ready = std::all_of(refs.begin(), refs.end(), [&](const EventId& r) { return chain_.contains(r); });
         if (ready && try_insert(it->second)) {
            it       = pending_.erase(it);
            progress = true;
         } else {
            ++it;
         }
      }
   }
   return report;
}

void Node::on_inserted(Index i, IngestReport& report) {
   quarantined_.resize(chain_.size(), false);
   tainted_.resize(chain_.size(), false);
   auto sp     = chain_.self_parent(i);
   tainted_[i] = sp && tainted_[*sp];
   // Only sibling pairs (shared self-parent, or two leaves); every other fork
   // pair descends from one and is covered by taint.
   for (Index j : chain_.fork_partners(i)) {
      if (chain_.self_parent(j) != sp)
         continue;
      const auto& a    = chain_.event(i);
      const auto& b    = chain_.event(j);
      auto        pair = std::minmax(a.id, b.id);
      if (!known_forks_.emplace(pair.first, pair.second).second)
         continue;
      report.forks.emplace_back(pair.first, pair.second);
      quarantine(lamport_key(a) < lamport_key(b) ? j : i);
      notices_.push_back({a.id == pair.first ? a : b, a.id == pair.first ? b : a});
   }
}

void Node::quarantine(Index q) {
   quarantined_[q] = true;
   const auto& e   = chain_.event(q);
   for (Index i : chain_.by_creator(e.creator)) {
      if (chain_.event(i).seq < e.seq)
         continue;
      auto sp     = chain_.self_parent(i);
      tainted_[i] = quarantined_[i] || (sp && tainted_[*sp]);
   }
}

std::optional<Index> Node::untainted_top(NodeId creator) const {
   auto list = chain_.by_creator(creator);
   for (auto it = list.rbegin(); it != list.rend(); ++it)
      if (!tainted_[*it])
         return *it;
   return std::nullopt;
}

std::vector<EventId> Node::wanted() const {
   std::set<EventId> pending_ids, out;
   for (const auto& [k, e] : pending_)
      pending_ids.insert(e.id);
   for (const auto& [k, e] : pending_)
      for (const auto& r : e.refs())
         if (!chain_.contains(r) && !pending_ids.contains(r))
            out.insert(r);
   return {out.begin(), out.end()};
}

std::uint64_t Node::submit_transaction(std::uint64_t step_no) {
   std::uint64_t tx = (std::uint64_t{cfg_.id.value} << 40) | next_tx_++;
   mempool_.push_back(tx);
   txs_[tx]     = {Stage::Submitted, std::nullopt};
   tx_step_[tx] = step_no;
   open_txs_.insert(tx);
   return tx;
}

ConfirmationStage Node::confirmation_stage(std::uint64_t tx) const {
   auto it = txs_.find(tx);
   if (it == txs_.end())
      throw NodeError(NodeErrc::UnknownTransaction, "tx " + std::to_string(tx));
   return it->second;
}

void Node::set_stage(std::uint64_t tx, Stage s, std::optional<std::uint64_t> pos) {
   auto& cur = txs_.at(tx);
   if (s < cur.stage) {
      ++regressions_;
      return;
   }
   cur.stage = s;
   if (pos)
      cur.position = pos;
   if (s == Stage::Finalized)
      open_txs_.erase(tx);
}

Bytes Node::take_payload() {
   Bytes payload;
   for (auto tx : mempool_)
      put_u64(payload, tx);
   return payload;
}

std::vector<Envelope> Node::step(std::uint64_t step_no, std::vector<Envelope> inbox, bool create, bool sync_all) {
   std::vector<Envelope> out;
   if (cfg_.behavior == Behavior::Silent)
      return out;

   std::vector<EventBlock>                          events;
   std::vector<std::pair<NodeId, const SyncRequest*>> requests;
   std::map<NodeId, std::size_t>                    fresh_from;
   for (const auto& env : inbox) {
      std::visit(
         [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, SyncRequest>) {
               requests.emplace_back(env.src, &m);
            } else if constexpr (std::is_same_v<T, SyncResponse>) {
               for (const auto& e : m.events) {
                  if (!chain_.contains(e.id))
                     ++fresh_from[env.src];
                  events.push_back(e);
               }
            } else if constexpr (std::is_same_v<T, Broadcast>) {
               events.push_back(m.event);
            } else {
               events.push_back(m.first);
               events.push_back(m.second);
            }
         },
         env.body);
   }
   for (const auto& [src, count] : fresh_from)
      stats_[src].received += count;
   ingest_events(std::move(events));

   for (const auto& [src, req] : requests) {
      auto resp = handle_sync_request(*req);
      if (!resp.empty())
         out.push_back({cfg_.id, src, SyncResponse{std::move(resp)}});
   }

   auto all_peers = [&] {
      std::vector<NodeId> ps;
      for (std::uint32_t i = 0; i < cfg_.n; ++i)
         if (NodeId{i} != cfg_.id)
            ps.push_back(NodeId{i});
      return ps;
   };

   if (create) {
      std::vector<NodeId> peers;
      if (cfg_.n >= 2 && cfg_.k >= 2)
         peers = select_peers(std::min(cfg_.k - 1, cfg_.n - 1), step_no);
      for (NodeId p : peers) {
         ++stats_[p].syncs;
         out.push_back({cfg_.id, p, SyncRequest{chain_.known(), wanted()}});
      }
      std::vector<EventId> tops;
      for (NodeId p : peers)
         if (auto t = untainted_top(p))
            tops.push_back(chain_.event(*t).id);

      auto payload = take_payload();
      auto main    = create_event(tops, payload);
      for (auto tx : mempool_) {
         tx_event_[tx] = *own_tip_;
         set_stage(tx, Stage::Batched);
      }
      mempool_.clear();

      std::vector<EventBlock> siblings;
      bool byzantine = cfg_.behavior == Behavior::Forker || cfg_.behavior == Behavior::Equivocator;
      if (byzantine && !main.is_leaf()) {
         Rng rng(derive_seed(cfg_.seed, {cfg_.id.value, step_no, kForkStream}));
         if (rng.chance(cfg_.w_p))
            for (std::size_t j = 0; j < cfg_.w_c; ++j) {
               Bytes p = main.payload;
               p.push_back(0xff);
               p.push_back(static_cast<std::uint8_t>(j));
               auto sib = make_event(cfg_.id, main.self_ref, main.other_refs, main.lamport, std::move(p), main.seq);
               IngestReport ignored;
               on_inserted(chain_.insert(sib), ignored);
               siblings.push_back(std::move(sib));
            }
      }
      for (NodeId p : all_peers()) {
         if (cfg_.behavior == Behavior::Equivocator && !siblings.empty() && p.value % 2 == 1) {
            out.push_back({cfg_.id, p, Broadcast{siblings[(p.value / 2) % siblings.size()]}});
            continue;
         }
         out.push_back({cfg_.id, p, Broadcast{main}});
         if (cfg_.behavior == Behavior::Forker)
            for (const auto& s : siblings)
               out.push_back({cfg_.id, p, Broadcast{s}});
      }
   } else if (sync_all || !pending_.empty()) {
      KnownMap known = sync_all ? KnownMap{} : chain_.known();
      for (NodeId p : all_peers())
         out.push_back({cfg_.id, p, SyncRequest{known, wanted()}});
   }

   for (const auto& notice : notices_)
      for (NodeId p : all_peers())
         out.push_back({cfg_.id, p, notice});
   notices_.clear();

   run_pipeline();
   return out;
}

void Node::run_pipeline() {
   Index from = pipeline_done_;
   if (from == chain_.size())
      return;
   auto diff = diff_from_chain(chain_, from);
   layer_lpl_online(lstate_, diff);
   if (cfg_.algo == LayeringAlgo::OCg)
      layer_cg_online(cg_state_, cfg_.cg_width, diff_from_chain(chain_, from, true));
   std::vector<Index> fresh(chain_.size() - from);
   std::iota(fresh.begin(), fresh.end(), from);
   roots_.extend(chain_, lstate_.layering, fresh);
   std::size_t clothos_before = finality_.clothos().size();
   finality_.advance(chain_, lstate_.layering, roots_);
   update_transactions(from, clothos_before);
   pipeline_done_ = static_cast<Index>(chain_.size());
}

void Node::update_transactions(Index fresh_from, std::size_t clothos_before) {
   const auto&        clothos = finality_.clothos();
   std::vector<Index> new_roots;
   for (Index i = fresh_from; i < chain_.size(); ++i)
      if (roots_.is_root(i))
         new_roots.push_back(i);
   std::vector<std::uint64_t> open(open_txs_.begin(), open_txs_.end());
   for (auto tx : open) {
      auto ev = tx_event_.find(tx);
      if (ev == tx_event_.end())
         continue;
      Index e = ev->second;
      if (auto pos = finality_.position(e)) {
         set_stage(tx, Stage::Finalized, pos);
         continue;
      }
      Stage cur = txs_.at(tx).stage;
      if (cur < Stage::ClothoConfirmed &&
          std::any_of(clothos.begin() + static_cast<std::ptrdiff_t>(clothos_before), clothos.end(),
                      [&](const ClothoRecord& c) { return chain_.ancestor_or_self(e, c.root); })) {
         set_stage(tx, Stage::ClothoConfirmed);
         continue;
      }
      if (cur < Stage::RootConfirmed &&
          std::any_of(new_roots.begin(), new_roots.end(), [&](Index r) { return chain_.ancestor_or_self(e, r); }))
         set_stage(tx, Stage::RootConfirmed);
   }
}

std::vector<Index> Node::reported_roots() const {
   std::vector<Index> out;
   for (Index r : roots_.graph(chain_, lstate_.layering).roots)
      if (!tainted(r))
         out.push_back(r);
   return out;
}

GlobalState Node::estimate_global_state() const {
   for (std::uint32_t c = 0; c < cfg_.n; ++c)
      if (chain_.by_creator(NodeId{c}).empty())
         throw NodeError(NodeErrc::IncompleteCoverage, "creator " + std::to_string(c) + " has no event yet");
   const auto&       layers = lstate_.layering.layers;
   GlobalState       gs;
   std::vector<bool> removed(chain_.size(), false);
   std::set<NodeId>  processed;
   for (auto l = layers.size(); l-- > 0 && processed.size() < cfg_.n;) {
      std::vector<Index> rest;
      for (Index v : layers[l]) {
         if (processed.contains(chain_.event(v).creator)) {
            removed[v] = true;
            gs.removed.push_back(v);
         } else {
            rest.push_back(v);
         }
      }
      if (rest.empty())
         continue;
      Index pick = *std::min_element(rest.begin(), rest.end(), [&](Index a, Index b) {
         return lamport_key(chain_.event(a)) < lamport_key(chain_.event(b));
      });
      removed[pick] = true;
      gs.removed.push_back(pick);
      processed.insert(chain_.event(pick).creator);
   }
   // Running out of layers first (several creators topped out on one layer)
   // simply ends the loop.
   // Closure pass: drop anything built on a removed event.
   std::vector<bool> gone(chain_.size(), false);
   for (Index i = 0; i < chain_.size(); ++i) {
      gone[i] = removed[i];
      for (Index p : chain_.parents(i))
         gone[i] = gone[i] || gone[p];
      if (!gone[i])
         gs.events.push_back(i);
   }
   return gs;
}

PipelineCheck Node::check_against_batch() const {
   PipelineCheck      chk;
   std::ostringstream why;
   auto               dag = DagView::from_chain(chain_);
   auto               lpl = layer_lpl(dag);
   chk.layering           = lpl.phi == lstate_.layering.phi;
   if (!chk.layering)
      why << "layering ";

   RootGraphBuilder   batch(cfg_.n);
   std::vector<Index> all(chain_.size());
   std::iota(all.begin(), all.end(), 0);
   batch.extend(chain_, lpl, all);
   auto inc_graph = roots_.graph(chain_, lstate_.layering);
   auto bat_graph = batch.graph(chain_, lpl);
   chk.roots = inc_graph == bat_graph && batch.root_frames() == roots_.root_frames() &&
               batch.seen_frames() == roots_.seen_frames();
   if (!chk.roots)
      why << "roots ";
   try {
      chk.root_frames = assign_root_frames(chain_, bat_graph, cfg_.n) == batch.root_frames();
   } catch (const RootFrameError& e) {
      chk.root_frames = false;
      why << e.what() << ' ';
   }

   FinalityEngine fin(cfg_.n, cfg_.clotho_gap);
   fin.advance(chain_, lpl, batch);
   auto key = [](const std::vector<ClothoRecord>& cs) {
      std::vector<std::pair<Index, std::uint32_t>> out;
      for (const auto& c : cs)
         out.emplace_back(c.root, c.frame);
      std::sort(out.begin(), out.end());
      return out;
   };
   chk.clothos = fin.decided_frames() == finality_.decided_frames() && key(fin.clothos()) == key(finality_.clothos());
   if (!chk.clothos)
      why << "clothos ";
   chk.order = fin.order() == finality_.order();
   if (!chk.order)
      why << "order ";
   chk.detail = why.str();
   return chk;
}

} // namespace onlay
