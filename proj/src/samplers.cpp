#include "dimcmc/samplers.hpp"

namespace dimcmc {

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::ExactZMh: return "exact-z-mh";
    case Algorithm::Savm: return "savm";
    case Algorithm::Mavm: return "mavm";
    case Algorithm::Exchange: return "exchange";
    case Algorithm::ExchangeBridged: return "exchange-bridged";
  }
  throw std::logic_error("algorithm_name: unknown algorithm");
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "exact-z-mh") return Algorithm::ExactZMh;
  if (name == "savm") return Algorithm::Savm;
  if (name == "mavm") return Algorithm::Mavm;
  if (name == "exchange") return Algorithm::Exchange;
  if (name == "exchange-bridged") return Algorithm::ExchangeBridged;
  throw std::invalid_argument("unknown algorithm: " + name);
}

}  // namespace dimcmc
