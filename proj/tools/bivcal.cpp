// bivcal: generate synthetic ensembles, calibrate them on rolling windows,
// verify the predictions and compare methods.

#include <CLI11.hpp>

#include <iostream>

#include "bivcal/pipeline.hpp"

namespace {

std::optional<bivcal::Date> optional_date(const std::string& text) {
    if (text.empty()) return std::nullopt;
    return bivcal::Date::parse(text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bivariate BMA calibration of wind speed and temperature ensembles"};
    app.require_subcommand(1);

    // generate
    bivcal::SynthConfig synth;
    std::string grouping_name = "individual";
    std::string start = "2008-01-01";
    std::string csv_out;
    double bias_wind = synth.member_bias(0), bias_temp = synth.member_bias(1);
    auto* gen = app.add_subcommand("generate", "write a synthetic dataset (CSV and manifest)");
    gen->add_option("--stations", synth.n_stations)->check(CLI::PositiveNumber);
    gen->add_option("--days", synth.n_days)->check(CLI::PositiveNumber);
    gen->add_option("--members", synth.members)->check(CLI::PositiveNumber);
    gen->add_option("--dispersion", synth.dispersion_factor);
    gen->add_option("--corr", synth.truth_corr, "wind-temperature correlation of the truth");
    gen->add_option("--bias-wind", bias_wind);
    gen->add_option("--bias-temp", bias_temp);
    gen->add_option("--grouping", grouping_name);
    gen->add_option("--seed", synth.seed);
    gen->add_option("--start", start, "first date, YYYY-MM-DD");
    gen->add_option("--output", csv_out, "CSV path; the manifest is written next to it")->required();

    // calibrate
    bivcal::RunConfig run;
    std::string method = "bma_full", cal_grouping, corr_period, from, to, dataset, output;
    auto* cal = app.add_subcommand("calibrate", "fit rolling-window models and score every target date");
    cal->add_option("--dataset", dataset)->required();
    cal->add_option("--method", method)->check(CLI::IsMember({"raw", "bma_full", "bma_pars", "copula"}));
    cal->add_option("--grouping", cal_grouping, "overrides the manifest grouping");
    cal->add_option("--training-days", run.training_days);
    cal->add_option("--mc-samples", run.mc_samples);
    cal->add_option("--corr-period", corr_period, "START:END dates for the copula correlation");
    cal->add_option("--from", from, "first target date");
    cal->add_option("--to", to, "last target date");
    cal->add_option("--output", output)->required();
    cal->add_option("--seed", run.seed);
    cal->add_option("--threads", run.threads, "worker threads (0: all cores)");

    // verify
    bivcal::VerifyConfig ver;
    std::string run_dir, ver_dataset, ver_output;
    auto* verify = app.add_subcommand("verify", "aggregate scored predictions into a report");
    verify->add_option("--predictions", run_dir, "calibrate output directory")->required();
    verify->add_option("--dataset", ver_dataset)->required();
    verify->add_option("--output", ver_output, "defaults to the predictions directory");

    // compare
    std::vector<std::string> reports;
    std::string table_csv;
    auto* cmp = app.add_subcommand("compare", "side-by-side table of reports");
    cmp->add_option("reports", reports)->required();
    cmp->add_option("--csv", table_csv, "also write the table as CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            synth.member_bias = {bias_wind, bias_temp};
            synth.grouping = bivcal::parse_grouping(grouping_name);
            synth.start_date = bivcal::Date::parse(start);
            bivcal::cmd_generate(synth, csv_out);
        } else if (*cal) {
            run.dataset = dataset;
            run.output = output;
            run.method = bivcal::parse_method(method);
            if (!cal_grouping.empty()) run.grouping = bivcal::parse_grouping(cal_grouping);
            if (!corr_period.empty()) run.corr_period = bivcal::DateRange::parse(corr_period);
            run.from = optional_date(from);
            run.to = optional_date(to);
            const auto summary = bivcal::cmd_calibrate(run);
            std::cerr << summary.dates.size() << " dates calibrated, " << summary.skipped.size() << " skipped\n";
        } else if (*verify) {
            ver.run_dir = run_dir;
            ver.dataset = ver_dataset;
            ver.output = ver_output;
            const auto report = bivcal::cmd_verify(ver);
            std::cout << bivcal::report_to_json(report).dump(2) << '\n';
        } else if (*cmp) {
            std::vector<std::filesystem::path> paths(reports.begin(), reports.end());
            const auto table = bivcal::cmd_compare(paths);
            std::cout << table.text;
            if (!table_csv.empty()) {
                std::ofstream out(table_csv, std::ios::binary);
                out << table.csv;
                if (!out) throw bivcal::Error("cannot write " + table_csv);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
