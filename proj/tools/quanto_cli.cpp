// quanto_cli: price quanto calls, run the comparison cases, emit smiles and
// synthesize expert matrices. Exit 0 on success, 2 on usage errors, 1 on
// domain, numeric or I/O failures.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "CLI11.hpp"
#include "quanto.hpp"

using namespace quanto;
namespace fs = std::filesystem;

namespace {

// Flag combinations CLI11 cannot express. Reported as usage errors.
struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Files are written under a temporary name and renamed once every output of
// the command has been produced, so a failure leaves nothing behind.
class AtomicOutputs {
public:
    ~AtomicOutputs() {
        for (const auto& [tmp, final_path] : files_) {
            std::error_code ec;
            fs::remove(tmp, ec);
        }
    }

    void add(const std::string& path, const std::function<void(std::ostream&)>& fill) {
        const std::string tmp = path + ".tmp." + std::to_string(::getpid());
        {
            std::ofstream out(tmp, std::ios::binary);
            if (!out) throw std::ios_base::failure("cannot write `" + path + "`");
            fill(out);
            out.flush();
            if (!out) throw std::ios_base::failure("write failed for `" + path + "`");
        }
        files_.emplace_back(tmp, path);
    }

    void commit() {
        for (const auto& [tmp, final_path] : files_) fs::rename(tmp, final_path);
        files_.clear();
    }

private:
    std::vector<std::pair<std::string, std::string>> files_;
};

KeyValueFile base_manifest(const std::string& command, std::uint64_t seed, const std::string& started) {
    KeyValueFile kv;
    kv.set("command", command);
    kv.set("seed", std::to_string(seed));
    kv.set("version", kVersion);
    kv.set("started_at", started);
    return kv;
}

MarketConfig load_market(const std::string& path) { return path.empty() ? MarketConfig::reference() : MarketConfig::load(path); }

// --param grammar: a bare number, or comma-separated name=value pairs.
//   gaussian: rho            t: rho[,dof]            frank: alpha | rho=<target>
struct ResolvedFamily {
    CopulaGenerator gen;
    std::optional<double> frank_target;
};

ResolvedFamily resolve_family(const std::string& family, const std::string& param, std::uint64_t seed) {
    std::vector<std::pair<std::string, double>> named;
    std::vector<double> bare;
    std::stringstream ss(param);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const auto eq = tok.find('=');
        try {
            if (eq == std::string::npos)
                bare.push_back(parse_double(tok, "copula parameter"));
            else
                named.emplace_back(std::string(detail::trim(tok.substr(0, eq))),
                                   parse_double(tok.substr(eq + 1), "copula parameter"));
        } catch (const parse_error& e) {
            throw usage_error(std::string("--param: ") + e.what());
        }
    }
    auto get = [&](const std::string& name, std::size_t pos) -> std::optional<double> {
        for (const auto& [k, v] : named)
            if (k == name) return v;
        if (pos < bare.size()) return bare[pos];
        return std::nullopt;
    };
    auto only = [&](std::initializer_list<const char*> allowed, std::size_t max_bare) {
        for (const auto& [k, v] : named) {
            bool ok = false;
            for (const char* a : allowed) ok = ok || k == a;
            if (!ok) throw usage_error("--param: unknown name `" + k + "` for family " + family);
        }
        if (bare.size() > max_bare || (!bare.empty() && !named.empty()))
            throw usage_error("--param: malformed value `" + param + "` for family " + family);
    };
    if (family == "gaussian") {
        only({"rho"}, 1);
        const auto rho = get("rho", 0);
        if (!rho) throw usage_error("--param: gaussian needs rho");
        return {GaussianCopula{*rho}, std::nullopt};
    }
    if (family == "t") {
        only({"rho", "dof"}, 2);
        const auto rho = get("rho", 0);
        if (!rho) throw usage_error("--param: t needs rho");
        return {StudentTCopula{*rho, get("dof", 1).value_or(kTDof)}, std::nullopt};
    }
    only({"alpha", "rho"}, 1);
    if (const auto target = get("rho", 99)) {
        if (get("alpha", 99)) throw usage_error("--param: give either alpha or rho for frank");
        return {FrankCopula{calibrate_frank_alpha(*target, rng::derive_seed(seed, "frank-calibration"))}, *target};
    }
    const auto alpha = get("alpha", 0);
    if (!alpha) throw usage_error("--param: frank needs alpha or rho=<target>");
    return {FrankCopula{*alpha}, std::nullopt};
}

void record_family(KeyValueFile& kv, const std::string& family, const ResolvedFamily& f) {
    kv.set("family", family);
    std::visit(
        [&](const auto& g) {
            using G = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<G, GaussianCopula>) {
                kv.set("rho", format_double(g.rho));
            } else if constexpr (std::is_same_v<G, StudentTCopula>) {
                kv.set("rho", format_double(g.rho));
                kv.set("dof", format_double(g.dof));
            } else {
                kv.set("frank_alpha", format_double(g.alpha));
            }
        },
        f.gen);
    if (f.frank_target) kv.set("frank_target_rho", format_double(*f.frank_target));
}

HestonParams parse_phi(const std::string& text, const char* flag) {
    try {
        return HestonParams::parse(text);
    } catch (const parse_error& e) {
        throw usage_error(std::string(flag) + ": " + e.what());
    }
}

std::uint32_t steps_for(std::uint32_t flag, double maturity) { return flag ? flag : SimGrid::default_steps(maturity); }

struct PriceFlags {
    std::string model, config, phi_sf = "0,0,0,0.2,0", phi_qinv = "0,0,0,0.2,0", expert_matrix, family, param;
    double strike = 0, maturity = 0;
    std::optional<double> vol_sf_atm, vol_q_atm, vol_sf_strike;
    std::size_t paths = 200'000, expert_rows = kExpertRows;
    std::uint32_t steps = 0;
    std::uint64_t seed = 1;
};

int cmd_price(const PriceFlags& f) {
    const MarketConfig mkt = load_market(f.config);
    const ContractSpec contract(f.strike, f.maturity);
    const SimGrid grid{f.paths, steps_for(f.steps, f.maturity), f.seed};
    const auto seeds = CaseSeeds::derive(f.seed);
    PriceResult res;
    if (f.model == "practitioner") {
        const bool any = f.vol_sf_atm || f.vol_q_atm || f.vol_sf_strike;
        double atm_sf, atm_q, at_k;
        if (any) {
            if (!(f.vol_sf_atm && f.vol_q_atm && f.vol_sf_strike))
                throw usage_error("practitioner needs all of --vol-sf-atm, --vol-q-atm, --vol-sf-strike");
            atm_sf = *f.vol_sf_atm, atm_q = *f.vol_q_atm, at_k = *f.vol_sf_strike;
        } else {
            // Vols implied from vanilla Monte Carlo under --phi-sf / --phi-qinv.
            const auto phi_sf = parse_phi(f.phi_sf, "--phi-sf"), phi_q = parse_phi(f.phi_qinv, "--phi-qinv");
            const double T = f.maturity;
            const auto st = simulate_heston_terminal(
                mkt.s0(), phi_sf, mkt.rf(), T, {grid.n_paths * kVanillaPathFactor, grid.n_steps, seeds.vanilla_sf});
            const double ks[] = {mkt.s0(), f.strike};
            const auto qs = vanilla_smile(st, mkt.s0(), mkt.rf(), T, ks);
            const auto qt = simulate_heston_terminal(mkt.qinv0(), phi_q, mkt.rf() - mkt.r(), T,
                                                     {grid.n_paths * kVanillaPathFactor, grid.n_steps, seeds.vanilla_qinv});
            const double kq[] = {mkt.qinv0()};
            const auto qq = vanilla_smile(qt, mkt.qinv0(), mkt.rf() - mkt.r(), T, kq);
            for (const auto* q : {&qs[0], &qs[1], &qq[0]})
                if (!q->ok) throw no_solution_error("vanilla at strike " + format_double(q->strike) + ": " + q->note);
            atm_sf = qs[0].implied_vol, at_k = qs[1].implied_vol, atm_q = qq[0].implied_vol;
        }
        res = price_practitioner(mkt, contract, atm_sf, atm_q, at_k);
    } else if (f.model == "dsw") {
        const auto p = DswParams::from_market(mkt, parse_phi(f.phi_sf, "--phi-sf"), parse_phi(f.phi_qinv, "--phi-qinv"));
        res = price_dsw(mkt, contract, p, {grid.n_paths, grid.n_steps, seeds.dsw});
    } else {
        const bool has_matrix = !f.expert_matrix.empty(), has_family = !f.family.empty();
        if (has_matrix == has_family)
            throw usage_error("copula needs exactly one of --expert-matrix or --copula-family/--copula-param");
        if (has_family && f.param.empty()) throw usage_error("--copula-family needs --copula-param");
        const auto phi_sf = parse_phi(f.phi_sf, "--phi-sf"), phi_q = parse_phi(f.phi_qinv, "--phi-qinv");
        const ExpertMatrix expert = has_matrix ? load_expert_csv(f.expert_matrix)
                                               : generate_expert_matrix(resolve_family(f.family, f.param, f.seed).gen,
                                                                        f.expert_rows, seeds.expert);
        const double T = f.maturity;
        const auto ms = simulate_heston_terminal(mkt.s0(), phi_sf, mkt.rf(), T, {grid.n_paths, grid.n_steps, seeds.marginal_sf});
        const auto mq = simulate_heston_terminal(mkt.qinv0(), phi_q, mkt.rf() - mkt.r(), T,
                                                 {grid.n_paths, grid.n_steps, seeds.marginal_qinv});
        res = price_copula(mkt, contract, EmpiricalMarginal(ms), EmpiricalMarginal(mq), KernelCopula(expert), grid.n_paths,
                           seeds.copula);
    }
    std::cout << "price=" << format_double(res.price) << " se=" << format_double(res.std_error) << '\n';
    return 0;
}

struct CaseFlags {
    int id = 1;
    std::string out, config;
    std::size_t paths = 200'000;
    std::uint32_t steps = 0;
    std::uint64_t seed = 1;
};

int cmd_case(const CaseFlags& f, const std::string& started) {
    const MarketConfig mkt = load_market(f.config);
    const auto spec = make_case(f.id, mkt, f.seed);
    const SimGrid grid{f.paths, steps_for(f.steps, spec.maturity), f.seed};
    const auto res = run_case(spec, mkt, grid);

    auto kv = base_manifest("case", f.seed, started);
    kv.set("case_id", std::to_string(f.id));
    kv.set("paths", std::to_string(grid.n_paths));
    kv.set("steps", std::to_string(grid.n_steps));
    kv.set("maturity", format_double(spec.maturity));
    kv.set("phi_sf", spec.phi_sf.to_string());
    kv.set("phi_qinv", spec.phi_qinv.to_string());
    record_family(kv, spec.family_name(), {spec.family, spec.frank_target_rho});
    kv.set("expert_rows", std::to_string(kExpertRows));
    kv.set("vol_sf_atm", format_double(res.vol_sf_atm));
    kv.set("vol_q_atm", format_double(res.vol_q_atm));
    mkt.append_to(kv);

    AtomicOutputs outs;
    outs.add(f.out, [&](std::ostream& o) { write_case_csv(o, res.rows); });
    outs.add(f.out + ".manifest", [&](std::ostream& o) { write_key_values(o, kv); });
    outs.commit();
    return 0;
}

struct SmileFlags {
    std::string phi, out, strikes;
    double spot = 0, drift = 0, maturity = 0;
    std::size_t paths = 200'000;
    std::uint32_t steps = 0;
    std::uint64_t seed = 1;
};

int cmd_smile(const SmileFlags& f, const std::string& started) {
    const auto phi = parse_phi(f.phi, "--phi");
    std::vector<double> ks;
    if (f.strikes.empty()) {
        detail::require(f.spot > 0, "spot must be positive");
        ks = default_strike_grid(f.spot);
    } else {
        std::stringstream ss(f.strikes);
        std::string tok;
        try {
            while (std::getline(ss, tok, ',')) ks.push_back(parse_double(tok, "strike"));
        } catch (const parse_error& e) {
            throw usage_error(std::string("--strikes: ") + e.what());
        }
    }
    const SimGrid grid{f.paths, steps_for(f.steps, f.maturity), f.seed};
    const auto rows = emit_smile(phi, f.spot, f.drift, f.maturity, ks, grid);

    auto kv = base_manifest("smile", f.seed, started);
    kv.set("phi", phi.to_string());
    kv.set("spot", format_double(f.spot));
    kv.set("drift", format_double(f.drift));
    kv.set("maturity", format_double(f.maturity));
    kv.set("paths", std::to_string(grid.n_paths));
    kv.set("steps", std::to_string(grid.n_steps));
    std::string klist;
    for (double k : ks) klist += (klist.empty() ? "" : ",") + format_double(k);
    kv.set("strikes", klist);

    AtomicOutputs outs;
    outs.add(f.out, [&](std::ostream& o) { write_smile_csv(o, rows); });
    outs.add(f.out + ".manifest", [&](std::ostream& o) { write_key_values(o, kv); });
    outs.commit();
    return 0;
}

struct GenFlags {
    std::string family, param, out;
    std::size_t n = kExpertRows;
    std::uint64_t seed = 1;
};

int cmd_gen_expert(const GenFlags& f, const std::string& started) {
    const auto fam = resolve_family(f.family, f.param, f.seed);
    const auto m = generate_expert_matrix(fam.gen, f.n, f.seed);
    auto kv = base_manifest("gen-expert", f.seed, started);
    record_family(kv, f.family, fam);
    kv.set("n", std::to_string(f.n));
    AtomicOutputs outs;
    outs.add(f.out, [&](std::ostream& o) { write_expert_csv(o, m); });
    outs.add(f.out + ".manifest", [&](std::ostream& o) { write_key_values(o, kv); });
    outs.commit();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    const std::string started = utc_now();
    CLI::App app{"Quanto option pricing: practitioner, joint Heston (DSW) and kernel copula"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    PriceFlags pf;
    auto* price = app.add_subcommand("price", "Price one quanto call; prints price=<v> se=<e>");
    price->add_option("--model", pf.model, "practitioner | dsw | copula")
        ->required()
        ->check(CLI::IsMember({"practitioner", "dsw", "copula"}));
    price->add_option("--config", pf.config, "Market config (key = value); defaults to the reference market")
        ->check(CLI::ExistingFile);
    price->add_option("--strike", pf.strike, "Strike in FOR")->required();
    price->add_option("--maturity", pf.maturity, "Maturity in years")->required();
    price->add_option("--phi-sf", pf.phi_sf, "Heston params of S_f: rho,kappa,v_bar,v0,eta");
    price->add_option("--phi-qinv", pf.phi_qinv, "Heston params of 1/Q: rho,kappa,v_bar,v0,eta");
    price->add_option("--vol-sf-atm", pf.vol_sf_atm, "Practitioner: ATM vol of S_f");
    price->add_option("--vol-q-atm", pf.vol_q_atm, "Practitioner: ATM vol of the FX rate");
    price->add_option("--vol-sf-strike", pf.vol_sf_strike, "Practitioner: vol of S_f at the strike");
    price->add_option("--expert-matrix", pf.expert_matrix, "Copula: expert CSV (s_f,q_inv)");
    price->add_option("--copula-family", pf.family, "Copula: synthesize expert data from gaussian | t | frank")
        ->check(CLI::IsMember({"gaussian", "t", "frank"}));
    price->add_option("--copula-param", pf.param, "Copula family parameter (e.g. -0.7, -0.7,3, rho=-0.7)");
    price->add_option("--expert-rows", pf.expert_rows, "Rows of synthesized expert data")->check(CLI::PositiveNumber);
    price->add_option("--paths", pf.paths, "Monte Carlo paths / copula draws")->check(CLI::PositiveNumber);
    price->add_option("--steps", pf.steps, "Time steps (default 96 per year, at least 24)")->check(CLI::PositiveNumber);
    price->add_option("--seed", pf.seed, "Master seed");

    CaseFlags cf;
    auto* kase = app.add_subcommand("case", "Run one of the six comparison cases and write its CSV");
    kase->add_option("--id", cf.id, "Case number")->required()->check(CLI::Range(1, 6));
    kase->add_option("--out", cf.out, "Output CSV; the manifest goes to <out>.manifest")->required();
    kase->add_option("--config", cf.config, "Market config (key = value)")->check(CLI::ExistingFile);
    kase->add_option("--paths", cf.paths, "Paths per pricer")->check(CLI::PositiveNumber);
    kase->add_option("--steps", cf.steps, "Time steps (default 96 per year, at least 24)")->check(CLI::PositiveNumber);
    kase->add_option("--seed", cf.seed, "Master seed");

    SmileFlags sf;
    auto* smile = app.add_subcommand("smile", "Implied-vol smile of one Heston asset");
    smile->add_option("--phi", sf.phi, "Heston params: rho,kappa,v_bar,v0,eta")->required();
    smile->add_option("--spot", sf.spot, "Spot")->required();
    smile->add_option("--drift", sf.drift, "Risk-neutral drift (also the discount rate)")->required();
    smile->add_option("--maturity", sf.maturity, "Maturity in years")->required();
    smile->add_option("--strikes", sf.strikes, "Comma-separated strikes (default: 21 from 0.5 to 1.5 spot)");
    smile->add_option("--out", sf.out, "Output CSV")->required();
    smile->add_option("--paths", sf.paths, "Paths")->check(CLI::PositiveNumber);
    smile->add_option("--steps", sf.steps, "Time steps")->check(CLI::PositiveNumber);
    smile->add_option("--seed", sf.seed, "Master seed");

    GenFlags gf;
    auto* gen = app.add_subcommand("gen-expert", "Synthesize an expert matrix from a parametric copula");
    gen->add_option("--family", gf.family, "gaussian | t | frank")
        ->required()
        ->check(CLI::IsMember({"gaussian", "t", "frank"}));
    gen->add_option("--param", gf.param, "rho | rho,dof | alpha or rho=<target>")->required();
    gen->add_option("--n", gf.n, "Rows");
    gen->add_option("--seed", gf.seed, "Master seed");
    gen->add_option("--out", gf.out, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (price->parsed()) return cmd_price(pf);
        if (kase->parsed()) return cmd_case(cf, started);
        if (smile->parsed()) return cmd_smile(sf, started);
        return cmd_gen_expert(gf, started);
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
