#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ec/bench.hpp"
#include "ec/config.hpp"
#include "ec/ec_optimizer.hpp"
#include "ec/error.hpp"
#include "ec/eval_engine.hpp"
#include "ec/io.hpp"
#include "ec/probability.hpp"
#include "ec/tasks.hpp"

namespace py = pybind11;

namespace {

using BoolArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;
using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

BoolArray bits_to_array(const ec::BitMatrix& m) {
  BoolArray out({m.rows(), m.cols()});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) v(i, j) = m.get(i, j);
  return out;
}

ec::BitMatrix array_to_bits(const BoolArray& a) {
  if (a.ndim() != 2) throw ec::DimensionError("expected a 2-D boolean array");
  const auto v = a.unchecked<2>();
  ec::BitMatrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m.set(i, j, v(i, j));
  return m;
}

FloatArray matrix_to_array(const ec::Matrix<float>& m) {
  FloatArray out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

void assign_matrix(ec::ProbabilityModel& model, ec::Matrix<float>& m, const FloatArray& a) {
  if (a.ndim() != 2 || static_cast<std::size_t>(a.shape(0)) != m.rows ||
      static_cast<std::size_t>(a.shape(1)) != m.cols) {
    throw ec::DimensionError("probability block has shape (" + std::to_string(m.rows) + ", " +
                             std::to_string(m.cols) + ")");
  }
  std::copy(a.data(), a.data() + a.size(), m.data.begin());
  model = ec::clip_model(std::move(model));
}

py::dict metrics_dict(const ec::MetricsRow& r) {
  py::dict d;
  d["gen"] = r.gen;
  d["ret_mean"] = r.ret_mean;
  d["ret_max"] = r.ret_max;
  d["ret_min"] = r.ret_min;
  d["ret_std"] = r.ret_std;
  d["elite_ret"] = r.elite_ret;
  d["seconds"] = r.seconds;
  return d;
}

py::bytes to_bytes(const std::vector<std::uint8_t>& v) {
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

std::vector<std::uint8_t> from_bytes(const py::bytes& b) {
  const std::string s = b;
  return {s.begin(), s.end()};
}

// Task plus the network it resolved (obs/act dimensions filled in).
struct BoundTask {
  std::shared_ptr<ec::Task> task;
  ec::NetworkConfig network;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Evolving connectivity: Bernoulli connection probabilities for recurrent spiking networks";

  auto error = py::register_exception<ec::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ec::ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<ec::DimensionError>(m, "DimensionError", error.ptr());
  py::register_exception<ec::FormatError>(m, "FormatError", error.ptr());
  py::register_exception<ec::ProtocolError>(m, "ProtocolError", error.ptr());

  py::class_<ec::NetworkConfig>(m, "NetworkConfig")
      .def(py::init<>())
      .def_readwrite("n_neurons", &ec::NetworkConfig::n_neurons)
      .def_readwrite("excitatory_ratio", &ec::NetworkConfig::excitatory_ratio)
      .def_readwrite("dt_ms", &ec::NetworkConfig::dt_ms)
      .def_readwrite("sim_steps_per_control", &ec::NetworkConfig::sim_steps_per_control)
      .def_readwrite("tau_syn_ms", &ec::NetworkConfig::tau_syn_ms)
      .def_readwrite("tau_m_ms", &ec::NetworkConfig::tau_m_ms)
      .def_readwrite("tau_out_ms", &ec::NetworkConfig::tau_out_ms)
      .def_readwrite("obs_dim", &ec::NetworkConfig::obs_dim)
      .def_readwrite("act_dim", &ec::NetworkConfig::act_dim)
      .def_readwrite("allow_self_connections", &ec::NetworkConfig::allow_self_connections)
      .def_property_readonly("n_excitatory", &ec::NetworkConfig::n_excitatory)
      .def("validate", &ec::NetworkConfig::validate)
      .def("input_resistance", &ec::NetworkConfig::input_resistance)
      .def("hidden_resistance", &ec::NetworkConfig::hidden_resistance)
      .def("output_resistance", &ec::NetworkConfig::output_resistance)
      .def(py::self == py::self);

  py::class_<ec::Genome>(m, "Genome")
      .def(py::init([](const BoolArray& w_in, const BoolArray& w_rec, const BoolArray& w_out) {
             return ec::Genome{array_to_bits(w_in), array_to_bits(w_rec), array_to_bits(w_out)};
           }),
           py::arg("w_in"), py::arg("w_rec"), py::arg("w_out"))
      .def_property_readonly("w_in", [](const ec::Genome& g) { return bits_to_array(g.w_in); })
      .def_property_readonly("w_rec", [](const ec::Genome& g) { return bits_to_array(g.w_rec); })
      .def_property_readonly("w_out", [](const ec::Genome& g) { return bits_to_array(g.w_out); })
      .def("connection_count", &ec::Genome::connection_count)
      .def("bit_count", &ec::Genome::bit_count)
      .def(py::self == py::self);

  py::class_<ec::ProbabilityModel>(m, "ProbabilityModel")
      .def_readonly("epsilon", &ec::ProbabilityModel::epsilon)
      .def_readonly("pin_diagonal", &ec::ProbabilityModel::pin_diagonal)
      .def_property(
          "p_in", [](const ec::ProbabilityModel& p) { return matrix_to_array(p.p_in); },
          [](ec::ProbabilityModel& p, const FloatArray& a) { assign_matrix(p, p.p_in, a); })
      .def_property(
          "p_rec", [](const ec::ProbabilityModel& p) { return matrix_to_array(p.p_rec); },
          [](ec::ProbabilityModel& p, const FloatArray& a) { assign_matrix(p, p.p_rec, a); })
      .def_property(
          "p_out", [](const ec::ProbabilityModel& p) { return matrix_to_array(p.p_out); },
          [](ec::ProbabilityModel& p, const FloatArray& a) { assign_matrix(p, p.p_out, a); })
      .def("__len__", &ec::ProbabilityModel::size)
      .def(py::self == py::self);

  m.def("init_model", &ec::init_model, py::arg("network"), py::arg("epsilon") = ec::kDefaultEpsilon);
  m.def("sample_genome", &ec::sample_genome, py::arg("model"), py::arg("gen_seed"), py::arg("index"));
  m.def("extract", &ec::extract, py::arg("model"));

  m.def(
      "shape_returns",
      [](const std::vector<double>& returns, const std::string& mode) {
        return ec::shape_returns(returns, ec::parse_shaping(mode));
      },
      py::arg("returns"), py::arg("mode") = "centered_rank");
  m.def(
      "ec_update",
      [](const ec::ProbabilityModel& model, std::uint64_t gen_seed, const std::vector<double>& returns,
         double learning_rate, const std::string& shaping, std::size_t threads) {
        py::gil_scoped_release release;
        return ec::ec_update(model, gen_seed, returns, learning_rate, ec::parse_shaping(shaping), threads);
      },
      py::arg("model"), py::arg("gen_seed"), py::arg("returns"), py::arg("learning_rate") = 0.15,
      py::arg("shaping") = "centered_rank", py::arg("threads") = 1,
      "Update from seeds: genome i of the generation is sample_genome(model, gen_seed, i).");
  m.def(
      "ec_update_explicit",
      [](const ec::ProbabilityModel& model, const std::vector<ec::Genome>& genomes,
         const std::vector<double>& returns, double learning_rate, const std::string& shaping) {
        return ec::ec_update(model, genomes, returns, learning_rate, ec::parse_shaping(shaping));
      },
      py::arg("model"), py::arg("genomes"), py::arg("returns"), py::arg("learning_rate") = 0.15,
      py::arg("shaping") = "centered_rank");

  m.def(
      "packed_matvec",
      [](const BoolArray& mask, const py::array_t<bool, py::array::c_style | py::array::forcecast>& spikes) {
        const ec::BitMatrix bits = array_to_bits(mask);
        if (spikes.ndim() != 1 || static_cast<std::size_t>(spikes.shape(0)) != bits.cols()) {
          throw ec::DimensionError("spike vector length must equal the mask's column count");
        }
        ec::BitVector v(bits.cols());
        for (std::size_t j = 0; j < bits.cols(); ++j) v.set(j, spikes.data()[j]);
        const auto out = ec::packed_matvec(bits, v);
        py::array_t<std::int32_t> result({out.size()});
        std::copy(out.begin(), out.end(), result.mutable_data());
        return result;
      },
      py::arg("mask"), py::arg("spikes"));

  py::class_<BoundTask>(m, "Task")
      .def(py::init([](const std::string& name, ec::NetworkConfig network, std::uint64_t target_seed) {
             ec::TaskConfig config;
             config.name = name;
             config.target_seed = target_seed;
             std::shared_ptr<ec::Task> task = ec::make_task(config, network);
             return BoundTask{std::move(task), network};
           }),
           py::arg("name"), py::arg("network"), py::arg("target_seed") = 0)
      .def_property_readonly("name", [](const BoundTask& t) { return t.task->name(); })
      .def_readonly("network", &BoundTask::network)
      .def(
          "evaluate",
          [](const BoundTask& t, const ec::Genome& genome, std::uint64_t episode_seed) {
            py::gil_scoped_release release;
            return t.task->evaluate(genome, episode_seed);
          },
          py::arg("genome"), py::arg("episode_seed"))
      .def(
          "evaluate_population",
          [](const BoundTask& t, const ec::ProbabilityModel& model, std::size_t n, std::uint64_t gen_seed,
             std::size_t threads) {
            py::gil_scoped_release release;
            return ec::evaluate_population(model, *t.task, n, gen_seed, threads);
          },
          py::arg("model"), py::arg("n"), py::arg("gen_seed"), py::arg("threads") = 1);

  m.def("generation_seed", &ec::generation_seed, py::arg("run_seed"), py::arg("generation"));
  m.def("episode_seed", &ec::episode_seed, py::arg("gen_seed"), py::arg("index"));

  py::class_<ec::Trainer>(m, "Trainer")
      .def(py::init([](const std::string& config_text) { return ec::Trainer(ec::parse_config(config_text)); }),
           py::arg("config_text"))
      .def_property_readonly("generation", &ec::Trainer::generation)
      .def_property_readonly("population", &ec::Trainer::population)
      .def_property_readonly("network", &ec::Trainer::network)
      .def_property_readonly("model", &ec::Trainer::model)
      .def("gen_seed", &ec::Trainer::gen_seed, py::arg("generation"))
      .def(
          "evaluate",
          [](const ec::Trainer& t, std::size_t lo, std::size_t hi, std::size_t threads) {
            py::gil_scoped_release release;
            return t.evaluate(lo, hi, threads);
          },
          py::arg("lo"), py::arg("hi"), py::arg("threads") = 1)
      .def(
          "apply",
          [](ec::Trainer& t, const std::vector<double>& returns, bool with_elite) {
            const auto wire = ec::to_wire_returns(returns);
            py::gil_scoped_release release;
            return t.apply(wire, with_elite);
          },
          py::arg("returns"), py::arg("with_elite") = true)
      .def("checkpoint_bytes", [](const ec::Trainer& t) { return to_bytes(t.checkpoint_bytes()); });

  py::class_<ec::MetricsRow>(m, "MetricsRow")
      .def_readonly("gen", &ec::MetricsRow::gen)
      .def_readonly("ret_mean", &ec::MetricsRow::ret_mean)
      .def_readonly("ret_max", &ec::MetricsRow::ret_max)
      .def_readonly("ret_min", &ec::MetricsRow::ret_min)
      .def_readonly("ret_std", &ec::MetricsRow::ret_std)
      .def_readonly("elite_ret", &ec::MetricsRow::elite_ret)
      .def("as_dict", &metrics_dict);

  m.def(
      "train",
      [](const std::string& config_text) {
        const ec::RunConfig config = ec::parse_config(config_text);
        ec::TrainResult result;
        {
          py::gil_scoped_release release;
          result = ec::train(config);
        }
        py::dict out;
        py::list rows;
        for (const auto& r : result.metrics) rows.append(metrics_dict(r));
        out["metrics"] = rows;
        out["checkpoint"] = to_bytes(result.checkpoint);
        return out;
      },
      py::arg("config_text"), "Runs a full local training from INI text.");
  m.def(
      "normalize_config", [](const std::string& text) { return ec::format_config(ec::parse_config(text)); },
      py::arg("config_text"));

  m.def(
      "encode_checkpoint",
      [](const ec::NetworkConfig& n, const ec::ProbabilityModel& model) {
        return to_bytes(ec::encode_checkpoint(n, model));
      },
      py::arg("network"), py::arg("model"));
  m.def(
      "decode_checkpoint",
      [](const py::bytes& b) {
        auto ck = ec::decode_checkpoint(from_bytes(b));
        return py::make_tuple(ck.network, ck.model);
      },
      py::arg("data"));
  m.def(
      "encode_mask", [](const ec::Genome& g) { return to_bytes(ec::encode_mask(g)); }, py::arg("genome"));
  m.def(
      "decode_mask", [](const py::bytes& b) { return ec::decode_mask(from_bytes(b)); }, py::arg("data"));

  m.def(
      "kernel_bench",
      [](std::size_t neurons, std::size_t iterations, std::size_t threads, std::uint64_t seed) {
        ec::BenchResult r;
        {
          py::gil_scoped_release release;
          r = ec::run_kernel_bench(neurons, iterations, threads, seed);
        }
        py::dict d;
        d["packed_ops_per_sec"] = r.packed_ops_per_sec;
        d["dense_ops_per_sec"] = r.dense_ops_per_sec;
        d["ratio"] = r.ratio;
        d["checksum"] = r.checksum;
        return d;
      },
      py::arg("neurons") = 256, py::arg("iterations") = 2000, py::arg("threads") = 1, py::arg("seed") = 0);
}
