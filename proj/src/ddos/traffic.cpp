#include <algorithm>
#include <random>

#include "srv/ddos.hpp"

namespace srv::ddos {

namespace {

constexpr double kBatchSeconds = 300.0;

std::string addr(int a, int index) {
    return std::to_string(a) + "." + std::to_string((index >> 16) & 255) + "." + std::to_string((index >> 8) & 255) +
           "." + std::to_string(index & 255);
}

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    std::int64_t uniform(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_);
    }
    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    bool chance(double p) { return real(0, 1) < p; }

    // Ordinary traffic: web and ssh over TCP, DNS over UDP, a little ICMP.
    Flow benign(const std::string& file, int sources, int destinations) {
        Flow f;
        f.file_id = file;
        f.start = real(0, kBatchSeconds);
        f.end = f.start + real(0, 30);
        f.src = addr(10, static_cast<int>(uniform(0, sources - 1)));
        f.dst = addr(172, static_cast<int>(uniform(0, destinations - 1)));
        double kind = real(0, 1);
        if (kind < 0.70) {
            f.protocol = "TCP";
            f.src_port = uniform(1024, 65535);
            std::int64_t ports[] = {443, 443, 443, 80, 22, 8080};
            f.dst_port = ports[uniform(0, 5)];
        } else if (kind < 0.85) {
            f.protocol = "UDP";
            f.src_port = uniform(1024, 65535);
            f.dst_port = 53;
        } else if (kind < 0.95) {
            f.protocol = "UDP";
            f.src_port = 53;
            f.dst_port = uniform(1024, 65535);
        } else {
            f.protocol = "ICMP";
        }
        f.packets = uniform(1, 40);
        f.bytes = f.packets * uniform(40, 1500);
        return f;
    }

    Flow malformed(const std::string& file, int sources, int destinations) {
        Flow f = benign(file, sources, destinations);
        f.protocol = "UDP";
        f.src_port = uniform(1024, 65535);
        f.dst_port = 0;
        f.packets = uniform(1, 5);
        f.bytes = f.packets * uniform(28, 200);
        return f;
    }

private:
    std::mt19937_64 rng_;
};

struct Plan {
    int sources;
    int destinations;
    bool attack;
    std::int64_t malformed;
};

BatchTruth make_batch(Gen& g, const std::string& file, std::int64_t n, const Plan& plan, std::vector<Flow>& out) {
    BatchTruth truth;
    truth.file_id = file;
    truth.flows = n;
    std::int64_t planted = 0;
    std::vector<Flow> flows;
    if (plan.attack) {
        // Flood of malformed UDP from a botnet of 20 hosts towards one
        // victim, kept under 1% of the batch.
        planted = std::max<std::int64_t>(12, n * 6 / 1000);
        std::string victim = addr(172, 0x7f00 | static_cast<int>(g.uniform(0, 255)));
        std::vector<Flow> flood;
        for (std::int64_t i = 0; i < planted; ++i) {
            Flow f;
            f.file_id = file;
            f.start = g.real(100, 160);
            f.end = f.start + g.real(20, 40);
            f.dst = victim;
            f.protocol = "UDP";
            f.src_port = g.uniform(1024, 65535);
            f.dst_port = 0;
            f.packets = g.uniform(30000, 50000);
            f.bytes = f.packets * g.uniform(28, 60);
            flood.push_back(std::move(f));
        }
        std::sort(flood.begin(), flood.end(), [](const Flow& a, const Flow& b) { return a.start < b.start; });
        for (std::size_t i = 0; i < flood.size(); ++i) flood[i].src = addr(198, static_cast<int>(i % 20));
        flows.insert(flows.end(), flood.begin(), flood.end());
        truth.victims.push_back({0, victim});
    }
    for (std::int64_t i = 0; i < plan.malformed && static_cast<std::int64_t>(flows.size()) < n; ++i) {
        flows.push_back(g.malformed(file, plan.sources, plan.destinations));
    }
    while (static_cast<std::int64_t>(flows.size()) < n) flows.push_back(g.benign(file, plan.sources, plan.destinations));
    std::stable_sort(flows.begin(), flows.end(), [](const Flow& a, const Flow& b) { return a.start < b.start; });
    for (const auto& f : flows) truth.attack_matches += matches(attacks()[0], f) ? 1 : 0;
    if (!plan.attack) truth.attack_matches = 0;
    out.insert(out.end(), flows.begin(), flows.end());
    return truth;
}

std::string file_name(const std::string& profile, std::uint64_t seed, int batch) {
    return profile + "-" + std::to_string(seed) + "-" + std::to_string(batch);
}

} // namespace

Traffic generate_traffic(const std::string& profile, std::int64_t flows, std::uint64_t seed) {
    if (flows < 1) throw Error(Errc::Usage, "need at least one flow");
    Gen g(seed);
    Traffic t;
    // Roughly 66 malformed flows in 361867, never fewer than two.
    std::int64_t sparse = std::max<std::int64_t>(2, flows * 66 / 361867);
    if (profile == "d1") {
        t.truth.push_back(make_batch(g, file_name(profile, seed, 0), flows, {5000, 1500, true, sparse}, t.flows));
    } else if (profile == "d2") {
        t.truth.push_back(make_batch(g, file_name(profile, seed, 0), flows, {5000, 1500, false, sparse}, t.flows));
    } else if (profile == "d3") {
        t.truth.push_back(make_batch(g, file_name(profile, seed, 0), flows, {50000, 100, false, sparse}, t.flows));
    } else if (profile == "d4") {
        int attacked = static_cast<int>(g.uniform(0, 4));
        for (int b = 0; b < 5; ++b) {
            t.truth.push_back(make_batch(g, file_name(profile, seed, b), flows, {5000, 1500, b == attacked, sparse},
                                         t.flows));
        }
    } else {
        throw Error(Errc::Usage, "unknown traffic profile '" + profile + "' (expected d1, d2, d3 or d4)");
    }
    return t;
}

json truth_to_json(const std::vector<BatchTruth>& truth) {
    json out = json::array();
    for (const auto& b : truth) {
        json victims = json::array();
        for (const auto& v : b.victims) victims.push_back({{"attack", v.attack}, {"address", v.address}});
        out.push_back({{"file_id", b.file_id}, {"flows", b.flows}, {"victims", victims},
                       {"attack_matches", b.attack_matches}});
    }
    return json{{"batches", out}};
}

std::vector<BatchTruth> truth_from_json(const json& doc) {
    std::vector<BatchTruth> out;
    for (const auto& j : doc.at("batches")) {
        BatchTruth b;
        b.file_id = j.at("file_id").get<std::string>();
        b.flows = j.at("flows").get<std::int64_t>();
        b.attack_matches = j.at("attack_matches").get<std::int64_t>();
        for (const auto& v : j.at("victims")) b.victims.push_back({v.at("attack").get<int>(), v.at("address").get<std::string>()});
        out.push_back(std::move(b));
    }
    return out;
}

} // namespace srv::ddos
