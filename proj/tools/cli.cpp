#include "cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "taskalloc/corpus.hpp"
#include "taskalloc/errors.hpp"
#include "taskalloc/eval.hpp"
#include "taskalloc/models/persistence.hpp"
#include "taskalloc/recommender.hpp"
#include "taskalloc/service/server.hpp"
#include "taskalloc/textprep.hpp"

namespace taskalloc::cli {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::uint64_t seed = 42;
    std::string data;
    std::string meta;
    std::string roles;
    std::string kind;
    std::vector<std::string> kinds;
    std::vector<std::string> sets;
    std::vector<std::string> grid;
    std::string embeddings;
    std::string model;
    std::string out;
    std::string json_out;
    std::string curves;
    std::string title;
    std::string project;
    std::size_t k = 3;
    std::size_t folds = 10;
    std::size_t threads = 1;
    double train_fraction = 0.67;
    double fit_fraction = 1.0;
    bool per_project = false;
    bool json = false;
    service::ServiceConfig serve;
};

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
    f << text;
    if (!f) throw Error(ErrorCode::Io, "short write to " + path);
}

models::ModelKind kind_or_usage(const std::string& text) {
    const auto k = models::parse_kind(text);
    if (!k) throw UsageError("unknown model kind '" + text + "' (expected mnb, lr, svc, cs, rf, lstm or cnn)");
    return *k;
}

std::pair<std::string, std::string> split_assignment(const std::string& item) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("expected key=value, got '" + item + "'");
    return {item.substr(0, eq), item.substr(eq + 1)};
}

models::Hyperparameters hyperparameters(const Options& o) {
    models::Hyperparameters hp;
    try {
        for (const auto& item : o.sets) {
            const auto [key, value] = split_assignment(item);
            hp.set(key, value);
        }
        hp.seed = o.seed;
        hp.threads = o.threads;
        hp.validate();
    } catch (const Error& e) {
        throw UsageError(e.detail());
    }
    return hp;
}

/// Cartesian product of "key=v1,v2,..." axes over the base configuration;
/// the first axis varies slowest.
std::vector<models::Hyperparameters> expand_grid(const models::Hyperparameters& base,
                                                 const std::vector<std::string>& axes) {
    std::vector<models::Hyperparameters> grid{base};
    for (const auto& axis : axes) {
        const auto [key, values] = split_assignment(axis);
        std::vector<std::string> items;
        std::stringstream ss(values);
        for (std::string v; std::getline(ss, v, ',');) {
            if (!v.empty()) items.push_back(v);
        }
        if (items.empty()) throw UsageError("grid axis '" + key + "' has no values");
        std::vector<models::Hyperparameters> next;
        for (const auto& g : grid) {
            for (const auto& v : items) {
                auto hp = g;
                try {
                    hp.set(key, v);
                    hp.validate();
                } catch (const Error& e) {
                    throw UsageError(e.detail());
                }
                next.push_back(hp);
            }
        }
        grid = std::move(next);
    }
    return grid;
}

corpus::Corpus load(const Options& o) {
    const auto table = o.roles.empty() ? corpus::RoleTable::builtin() : corpus::RoleTable::from_file(o.roles);
    auto c = corpus::load_corpus(o.data, table);
    if (!o.meta.empty()) c = corpus::filter_projects(c, corpus::load_project_meta(o.meta));
    if (c.empty()) throw Error(ErrorCode::EmptyCorpus, "no records in " + o.data);
    return c;
}

std::optional<fs::path> embeddings_path(const Options& o) {
    if (o.embeddings.empty()) return std::nullopt;
    return fs::path(o.embeddings);
}

// ---------------------------------------------------------------------------

int cmd_ingest(const Options& o, std::ostream& out) {
    const auto c = load(o);
    out << "records\t" << c.size() << "\nprojects\t" << c.project_index().size() << "\n\n";

    out << "project_id\tproject_name\trecords";
    for (Role r : kAllRoles) out << '\t' << role_name(r);
    out << '\n';
    for (const auto& id : c.project_ids()) {
        const auto& positions = c.project_index().at(id);
        out << id << '\t' << c[positions.front()].project_name << '\t' << positions.size();
        for (auto n : corpus::role_distribution(c, id)) out << '\t' << n;
        out << '\n';
    }
    out << "(all)\t\t" << c.size();
    for (auto n : corpus::role_distribution(c)) out << '\t' << n;
    out << "\n\n";

    const auto titles = c.titles();
    std::vector<std::size_t> lengths;
    std::vector<std::string> joined;
    std::size_t empty_after_cleaning = 0;
    for (const auto& t : titles) {
        const auto tokens = textprep::preprocess(t);
        lengths.push_back(tokens.size());
        empty_after_cleaning += tokens.empty();
        joined.push_back(textprep::preprocess_joined(t));
    }
    const auto vocab = textprep::build_vocabulary(joined);
    out << "vocabulary\t" << vocab.size() << "\ndefault_max_len\t" << textprep::default_max_len(lengths)
        << "\nempty_after_cleaning\t" << empty_after_cleaning << '\n';

    if (!o.out.empty()) {
        std::ostringstream csv;
        corpus::write_csv(csv, c);
        write_file(o.out, csv.str());
    }
    return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
    const auto kind = kind_or_usage(o.kind);
    const auto hp = hyperparameters(o);
    if (!(o.fit_fraction > 0.0 && o.fit_fraction <= 1.0)) throw UsageError("--train-fraction must lie in (0, 1]");
    const auto all = load(o);

    corpus::Corpus train = all;
    corpus::Corpus validation;
    if (o.fit_fraction < 1.0) std::tie(train, validation) = corpus::split_train_validation(all, o.fit_fraction, o.seed);

    auto model = models::train_model(kind, train, hp, embeddings_path(o));
    model.set_project_roles(corpus::all_project_roles(all));
    models::save_model(model, o.model);

    out << "kind\t" << models::kind_label(kind) << "\ntrain_records\t" << train.size() << "\nparameters\t"
        << model.parameter_count() << '\n';
    if (!model.history().empty()) out << "epochs\t" << model.history().size() << '\n';
    if (!validation.empty()) {
        const auto r = eval::evaluate_holdout(model, validation);
        out << "validation_records\t" << validation.size() << "\nvalidation_accuracy\t" << fixed(r.accuracy) << '\n';
        if (r.loss) out << "validation_loss\t" << fixed(*r.loss) << '\n';
    }
    out << "model\t" << o.model << '\n';
    return kExitOk;
}

int cmd_crossval(const Options& o, std::ostream& out) {
    const auto kind = kind_or_usage(o.kind);
    const auto grid = expand_grid(hyperparameters(o), o.grid);
    const auto c = load(o);
    eval::CvOptions cv;
    cv.k = o.folds;
    cv.seed = o.seed;
    cv.threads = o.threads;
    cv.embeddings = embeddings_path(o);
    const auto report = eval::cross_validate(kind, c, grid, cv);

    std::string text = report.to_tsv();
    const auto& best = report.best();
    text += "\nwinner\t" + std::to_string(report.winner) + "\nmean\t" + fixed(best.mean) + "\nstddev\t" +
            fixed(best.stddev) + "\nhyperparameters\t" + best.hyperparameters.to_json().dump() + '\n';
    if (o.out.empty()) {
        out << text;
    } else {
        write_file(o.out, text);
    }
    if (!o.json_out.empty()) write_file(o.json_out, report.to_json().dump(2) + '\n');
    return kExitOk;
}

int cmd_benchmark(const Options& o, std::ostream& out) {
    eval::BenchmarkOptions b;
    b.hyperparameters = hyperparameters(o);
    b.train_fraction = o.train_fraction;
    b.embeddings = embeddings_path(o);
    if (!o.kinds.empty()) {
        b.kinds.clear();
        for (const auto& k : o.kinds) b.kinds.push_back(kind_or_usage(k));
    }
    if (!(o.train_fraction > 0.0 && o.train_fraction < 1.0)) throw UsageError("--train-fraction must lie in (0, 1)");
    const auto report = eval::benchmark(load(o), b);

    std::string text = report.to_tsv();
    if (o.per_project) text += '\n' + report.project_table_tsv();
    if (o.out.empty()) {
        out << text;
    } else {
        write_file(o.out, text);
    }
    if (!o.json_out.empty()) write_file(o.json_out, report.to_json().dump(2) + '\n');
    if (!o.curves.empty()) write_file(o.curves, report.curves_tsv());
    return kExitOk;
}

int cmd_recommend(const Options& o, std::ostream& out) {
    const auto model = models::load_model(o.model);
    const auto& known = model.project_roles();
    const auto it = o.project.empty() ? known.end() : known.find(o.project);
    const bool unknown_project = it == known.end();
    const auto roles = unknown_project ? RoleSet::all() : it->second;
    const auto rec = recommender::recommend_top_k(model, o.title, roles, o.k);

    if (o.json) {
        auto alternatives = nlohmann::json::array();
        for (const auto& r : rec.ranked) {
            alternatives.push_back({{"role", std::string(role_name(r.role))}, {"confidence", r.confidence}});
        }
        out << nlohmann::json{{"project_id", o.project},
                              {"chosen", std::string(role_name(rec.chosen))},
                              {"fallback_applied", rec.fallback_applied},
                              {"alternatives", alternatives},
                              {"model_kind", std::string(models::kind_name(rec.model_kind))},
                              {"unknown_project", unknown_project}}
                   .dump(2)
            << '\n';
        return kExitOk;
    }
    out << "chosen\t" << role_name(rec.chosen) << "\nfallback_applied\t" << (rec.fallback_applied ? "true" : "false")
        << "\nmodel\t" << models::kind_label(rec.model_kind) << '\n';
    if (unknown_project) out << "project\t" << (o.project.empty() ? "(none)" : o.project) << " (unknown, all roles)\n";
    out << "rank\trole\tconfidence\n";
    for (std::size_t i = 0; i < rec.ranked.size(); ++i) {
        out << i + 1 << '\t' << role_name(rec.ranked[i].role) << '\t' << fixed(rec.ranked[i].confidence) << '\n';
    }
    return kExitOk;
}

int cmd_serve(const Options& o, std::ostream& err) {
    if (!service::serve(o.serve)) {
        err << "error: cannot listen on " << o.serve.host << ':' << o.serve.port << '\n';
        return kExitData;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

void add_seed_option(CLI::App* cmd, std::uint64_t& seed) {
    cmd->add_option("--seed", seed, "Master random seed")->capture_default_str();
}

void add_data_options(CLI::App* cmd, Options& o) {
    add_seed_option(cmd, o.seed);
    cmd->add_option("--data", o.data, "Corpus CSV file, or a directory of CSV files")->required();
    cmd->add_option("--meta", o.meta, "Project metadata CSV; keeps only projects meeting the selection criteria");
    cmd->add_option("--roles", o.roles, "Role table mapping raw role labels to generalized roles");
}

constexpr const char* kHyperFooter =
    "Hyperparameter keys: embedding_dim, hidden_units, dropout_rate, epochs, batch_size,\n"
    "learning_rate, linear_learning_rate, early_stop_patience, early_stop_warmup, l2_lambda,\n"
    "trees, laplace_alpha, svc_c, cnn_filters, cnn_width, max_vocab, max_len, mnb_tfidf.\n"
    "The seed and thread count come from --seed and --threads.";

void add_hyper_options(CLI::App* cmd, Options& o) {
    cmd->footer(kHyperFooter);
    cmd->add_option("--set", o.sets, "Hyperparameter override key=value (repeatable)");
    cmd->add_option("--embeddings", o.embeddings, "word2vec text file for neural kinds");
    cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Role recommendation for incoming project tasks", "taskalloc"};
    app.require_subcommand(1, 1);

    auto* ingest = app.add_subcommand("ingest", "Validate a corpus and print its statistics");
    add_data_options(ingest, o);
    ingest->add_option("--out", o.out, "Write the normalized corpus CSV here");

    auto* train = app.add_subcommand("train", "Train one model kind and save it");
    add_data_options(train, o);
    add_hyper_options(train, o);
    train->add_option("--kind", o.kind, "Model kind: mnb, lr, svc, cs, rf, lstm, cnn")->required();
    train->add_option("--model", o.model, "Output model file")->required();
    train->add_option("--train-fraction", o.fit_fraction,
                      "Fraction used for training; below 1 the rest is scored as validation")
        ->capture_default_str();

    auto* crossval = app.add_subcommand("crossval", "K-fold cross-validation over a hyperparameter grid");
    add_data_options(crossval, o);
    add_hyper_options(crossval, o);
    crossval->add_option("--kind", o.kind, "Model kind: mnb, lr, svc, cs, rf, lstm, cnn")->required();
    crossval->add_option("--k", o.folds, "Number of folds (at least 2)")
        ->check(CLI::Range(std::size_t{2}, std::size_t{1000000}))
        ->capture_default_str();
    crossval->add_option("--grid", o.grid, "Grid axis key=v1,v2,... (repeatable)");
    crossval->add_option("--out", o.out, "Write the report here instead of stdout");
    crossval->add_option("--json", o.json_out, "Also write the report as JSON");

    auto* bench = app.add_subcommand("benchmark", "Train every kind on one split and report validation scores");
    add_data_options(bench, o);
    add_hyper_options(bench, o);
    bench->add_option("--kinds", o.kinds, "Model kinds to include (default: all)")->delimiter(',');
    bench->add_option("--train-fraction", o.train_fraction, "Training share of the split")->capture_default_str();
    bench->add_flag("--per-project", o.per_project, "Append per-project validation accuracy");
    bench->add_option("--curves", o.curves, "Write per-epoch training curves of neural kinds here");
    bench->add_option("--out", o.out, "Write the report here instead of stdout");
    bench->add_option("--json", o.json_out, "Also write the report as JSON");

    auto* rec = app.add_subcommand("recommend", "Recommend a role for one task title");
    add_seed_option(rec, o.seed);
    rec->add_option("--model", o.model, "Model file")->required();
    rec->add_option("--title", o.title, "Task title")->required();
    rec->add_option("--project", o.project, "Project id; unknown ids consider all roles");
    rec->add_option("--k", o.k, "Number of ranked roles to print")->check(CLI::PositiveNumber)->capture_default_str();
    rec->add_flag("--json", o.json, "Print JSON");

    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    try {
        o.serve.apply_environment();
    } catch (const Error& e) {
        err << "usage error: " << e.detail() << '\n';
        return kExitUsage;
    }
    add_seed_option(serve, o.serve.seed);
    serve->add_option("--host", o.serve.host, "Listen address (TASKALLOC_HOST)")->capture_default_str();
    serve->add_option("--port", o.serve.port, "Listen port, 0 for any (TASKALLOC_PORT)")->capture_default_str();
    serve->add_option("--registry", o.serve.registry_dir, "Model registry directory (TASKALLOC_REGISTRY)")
        ->capture_default_str();
    serve->add_option("--feedback-log", o.serve.feedback_log, "Feedback log file (TASKALLOC_FEEDBACK_LOG)")
        ->capture_default_str();
    serve->add_option("--default-k", o.serve.default_k, "Ranked roles per response (TASKALLOC_DEFAULT_K)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (*ingest) return cmd_ingest(o, out);
        if (*train) return cmd_train(o, out);
        if (*crossval) return cmd_crossval(o, out);
        if (*bench) return cmd_benchmark(o, out);
        if (*rec) return cmd_recommend(o, out);
        if (*serve) return cmd_serve(o, err);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace taskalloc::cli
