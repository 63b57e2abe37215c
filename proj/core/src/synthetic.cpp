#include "cslot/synthetic.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cslot/error.hpp"
#include "cslot/rng.hpp"

namespace cslot {

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(s);
  while (std::getline(in, field, sep)) out.push_back(field);
  return out;
}

bool is_placeholder(const std::string& w) { return w.size() > 1 && w[0] == '$'; }

}  // namespace

GrammarConfig parse_grammar(std::istream& in) {
  GrammarConfig g;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_on(line, '\t');
    if (fields[0] == "template") {
      if (fields.size() < 2 || fields.size() > 3) throw ParseError("template needs 1 or 2 fields", lineno);
      SentenceTemplate t;
      t.words = split_words(fields[1]);
      if (t.words.empty()) throw ParseError("empty template", lineno);
      if (fields.size() == 3 && !fields[2].empty()) {
        for (const auto& binding : split_on(fields[2], ',')) {
          const auto eq = binding.find('=');
          if (eq == std::string::npos || eq == 0 || eq + 1 == binding.size())
            throw ParseError("malformed binding '" + binding + "'", lineno);
          std::string name = binding.substr(0, eq);
          if (name[0] == '$') name.erase(0, 1);
          if (!t.bindings.emplace(name, binding.substr(eq + 1)).second)
            throw ParseError("placeholder '" + name + "' bound twice", lineno);
        }
      }
      g.templates.push_back(std::move(t));
    } else if (fields[0] == "lexicon") {
      if (fields.size() != 3 || fields[1].empty() || split_words(fields[2]).empty())
        throw ParseError("lexicon needs concept and value", lineno);
      g.lexicon[fields[1]].push_back(fields[2]);
    } else {
      throw ParseError("unknown directive '" + fields[0] + "'", lineno);
    }
  }
  return g;
}

GrammarConfig read_grammar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grammar '" + path.string() + "'");
  return parse_grammar(in);
}

void write_grammar(const GrammarConfig& g, std::ostream& out) {
  for (const auto& t : g.templates) {
    out << "template\t";
    for (std::size_t i = 0; i < t.words.size(); ++i) out << (i ? " " : "") << t.words[i];
    out << '\t';
    bool first = true;
    for (const auto& [name, slot] : t.bindings) {
      out << (first ? "" : ",") << name << '=' << slot;
      first = false;
    }
    out << '\n';
  }
  for (const auto& [concept_name, values] : g.lexicon)
    for (const auto& v : values) out << "lexicon\t" << concept_name << '\t' << v << '\n';
}

Corpus generate_synthetic(const GrammarConfig& grammar, const Ontology& ontology, std::size_t n,
                          std::uint64_t seed) {
  // Resolve every placeholder up front so configuration errors surface even
  // when n == 0.
  struct Resolved {
    std::string slot;
    std::vector<std::vector<std::string>> values;
  };
  std::vector<std::map<std::string, Resolved>> resolved(grammar.templates.size());
  for (std::size_t ti = 0; ti < grammar.templates.size(); ++ti) {
    const auto& t = grammar.templates[ti];
    for (const auto& w : t.words) {
      if (!is_placeholder(w)) continue;
      const std::string name = w.substr(1);
      auto b = t.bindings.find(name);
      if (b == t.bindings.end()) throw ConfigError("placeholder '$" + name + "' has no binding");
      if (!ontology.has_slot(b->second))
        throw ConfigError("placeholder '$" + name + "' bound to unknown slot '" + b->second + "'");
      const auto& concept_name = ontology.slot_to_branch(b->second)[0];
      auto lex = grammar.lexicon.find(concept_name);
      if (lex == grammar.lexicon.end() || lex->second.empty())
        throw ConfigError("no lexicon entries for concept '" + concept_name + "'");
      Resolved r{b->second, {}};
      for (const auto& v : lex->second) r.values.push_back(split_words(v));
      resolved[ti].emplace(name, std::move(r));
    }
  }

  Corpus corpus;
  if (n == 0) return corpus;
  if (grammar.templates.empty()) throw ConfigError("grammar has no templates");

  Rng rng(seed);
  corpus.utterances.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t ti = rng.index(grammar.templates.size());
    TaggedUtterance u;
    for (const auto& w : grammar.templates[ti].words) {
      if (!is_placeholder(w)) {
        u.tokens.push_back(w);
        u.tags.push_back("O");
        continue;
      }
      const auto& r = resolved[ti].at(w.substr(1));
      const auto& value = r.values[rng.index(r.values.size())];
      for (std::size_t i = 0; i < value.size(); ++i) {
        u.tokens.push_back(value[i]);
        u.tags.push_back((i == 0 ? "B-" : "I-") + r.slot);
      }
    }
    corpus.utterances.push_back(std::move(u));
  }
  return corpus;
}

namespace {

constexpr const char* kFlightOntology = R"(# flight domain: [bottom concept, top concept]
dims=2
city_name	city_name	null
fromloc.city_name	city_name	fromloc
toloc.city_name	city_name	toloc
stoploc.city_name	city_name	stoploc
airport_name	airport_name	null
fromloc.airport_name	airport_name	fromloc
toloc.airport_name	airport_name	toloc
state_name	state_name	null
fromloc.state_name	state_name	fromloc
toloc.state_name	state_name	toloc
airline_name	airline_name	null
depart_date.day_name	day_name	depart_date
arrive_date.day_name	day_name	arrive_date
return_date.day_name	day_name	return_date
depart_date.month_name	month_name	depart_date
return_date.month_name	month_name	return_date
depart_date.day_number	day_number	depart_date
return_date.day_number	day_number	return_date
depart_time.time	time	depart_time
arrive_time.time	time	arrive_time
depart_time.period_of_day	period_of_day	depart_time
arrive_time.period_of_day	period_of_day	arrive_time
class_type	class_type	null
meal	meal	null
cost_relative	cost_relative	null
)";

constexpr const char* kFlightGrammar = R"(# flight-booking templates
template	show me flights from $A to $B	A=fromloc.city_name,B=toloc.city_name
template	i want to fly from $A to $B on $D	A=fromloc.city_name,B=toloc.city_name,D=depart_date.day_name
template	what flights leave $A and arrive in $B	A=fromloc.city_name,B=toloc.city_name
template	list flights from $A to $B with a stop in $C	A=fromloc.city_name,B=toloc.city_name,C=stoploc.city_name
template	i need a flight to $B leaving $A in the $P	A=fromloc.city_name,B=toloc.city_name,P=depart_time.period_of_day
template	flights from $A to $B arriving before $T	A=fromloc.city_name,B=toloc.city_name,T=arrive_time.time
template	flights from $A to $B departing after $T	A=fromloc.city_name,B=toloc.city_name,T=depart_time.time
template	what is the $R fare from $A to $B	R=cost_relative,A=fromloc.city_name,B=toloc.city_name
template	show me $L flights from $A to $B	L=airline_name,A=fromloc.city_name,B=toloc.city_name
template	i would like a $K ticket from $A to $B	K=class_type,A=fromloc.city_name,B=toloc.city_name
template	does $L serve $M on flights to $B	L=airline_name,M=meal,B=toloc.city_name
template	what airlines fly into $B	B=toloc.city_name
template	flights departing $P from $A	P=depart_time.period_of_day,A=fromloc.airport_name
template	which flights arrive at $X	X=toloc.airport_name
template	what ground transportation is available in $C	C=city_name
template	how far is $X from downtown $C	X=airport_name,C=city_name
template	i want to go from $A to $B on $M $N and return on $M2 $N2	A=fromloc.city_name,B=toloc.city_name,M=depart_date.month_name,N=depart_date.day_number,M2=return_date.month_name,N2=return_date.day_number
template	round trip from $A to $B leaving $D returning $E	A=fromloc.city_name,B=toloc.city_name,D=depart_date.day_name,E=return_date.day_name
template	i need a flight arriving in $B on $D in the $P	B=toloc.city_name,D=arrive_date.day_name,P=arrive_time.period_of_day
template	are there flights from somewhere in $S to $S2	S=fromloc.state_name,S2=toloc.state_name
template	what flights leave $A in the $P and arrive in $B	A=fromloc.city_name,P=depart_time.period_of_day,B=toloc.city_name
template	show me the $R flight from $A to $B on $D	R=cost_relative,A=fromloc.city_name,B=toloc.city_name,D=depart_date.day_name
template	are there any flights from $A to $B that stop in $C	A=fromloc.city_name,B=toloc.city_name,C=stoploc.city_name
template	i would like to leave $A at $T and get to $B by $T2	A=fromloc.city_name,T=depart_time.time,B=toloc.city_name,T2=arrive_time.time
template	get me a $L flight to $B on $M $N	L=airline_name,B=toloc.city_name,M=depart_date.month_name,N=depart_date.day_number
template	list airports in $C	C=city_name
template	flights to $B from $X	B=toloc.city_name,X=fromloc.airport_name
template	which airlines have $K service from $A to $B	K=class_type,A=fromloc.city_name,B=toloc.city_name
template	on $D i need to fly from $A to $B arriving in the $P	D=depart_date.day_name,A=fromloc.city_name,B=toloc.city_name,P=arrive_time.period_of_day
template	what time does the flight from $A arrive in $B	A=fromloc.city_name,B=toloc.city_name
template	i want a flight that returns on $D from $B to $A	D=return_date.day_name,B=fromloc.city_name,A=toloc.city_name
template	which cities in $S does $L serve	S=state_name,L=airline_name
template	i need to get to $X from $A before $T	X=toloc.airport_name,A=fromloc.city_name,T=arrive_time.time
template	flights leaving $A on $D after $T going to $S	A=fromloc.city_name,D=depart_date.day_name,T=depart_time.time,S=toloc.state_name
lexicon	city_name	boston
lexicon	city_name	new york
lexicon	city_name	atlanta
lexicon	city_name	denver
lexicon	city_name	dallas
lexicon	city_name	pittsburgh
lexicon	city_name	baltimore
lexicon	city_name	philadelphia
lexicon	city_name	san francisco
lexicon	city_name	oakland
lexicon	city_name	washington
lexicon	city_name	chicago
lexicon	city_name	seattle
lexicon	city_name	miami
lexicon	city_name	houston
lexicon	city_name	los angeles
lexicon	city_name	salt lake city
lexicon	city_name	kansas city
lexicon	city_name	fort worth
lexicon	city_name	minneapolis
lexicon	city_name	detroit
lexicon	city_name	phoenix
lexicon	city_name	memphis
lexicon	city_name	nashville
lexicon	city_name	orlando
lexicon	city_name	tampa
lexicon	city_name	st. louis
lexicon	city_name	las vegas
lexicon	city_name	cleveland
lexicon	city_name	indianapolis
lexicon	airport_name	logan airport
lexicon	airport_name	la guardia
lexicon	airport_name	jfk
lexicon	airport_name	dulles
lexicon	airport_name	love field
lexicon	airport_name	general mitchell international
lexicon	airport_name	stapleton international
lexicon	airport_name	ohare
lexicon	state_name	california
lexicon	state_name	texas
lexicon	state_name	colorado
lexicon	state_name	georgia
lexicon	state_name	ohio
lexicon	state_name	florida
lexicon	state_name	arizona
lexicon	state_name	nevada
lexicon	state_name	tennessee
lexicon	state_name	minnesota
lexicon	airline_name	delta
lexicon	airline_name	united
lexicon	airline_name	american airlines
lexicon	airline_name	us air
lexicon	airline_name	continental
lexicon	airline_name	northwest
lexicon	airline_name	twa
lexicon	airline_name	alaska airlines
lexicon	airline_name	southwest
lexicon	airline_name	lufthansa
lexicon	day_name	monday
lexicon	day_name	tuesday
lexicon	day_name	wednesday
lexicon	day_name	thursday
lexicon	day_name	friday
lexicon	day_name	saturday
lexicon	day_name	sunday
lexicon	month_name	january
lexicon	month_name	february
lexicon	month_name	march
lexicon	month_name	april
lexicon	month_name	may
lexicon	month_name	june
lexicon	month_name	july
lexicon	month_name	august
lexicon	month_name	september
lexicon	month_name	october
lexicon	month_name	november
lexicon	month_name	december
lexicon	day_number	first
lexicon	day_number	second
lexicon	day_number	third
lexicon	day_number	fifth
lexicon	day_number	tenth
lexicon	day_number	twelfth
lexicon	day_number	fifteenth
lexicon	day_number	twentieth
lexicon	day_number	twenty first
lexicon	day_number	twenty third
lexicon	day_number	thirtieth
lexicon	time	5 pm
lexicon	time	8 am
lexicon	time	noon
lexicon	time	10 30 am
lexicon	time	6 oclock
lexicon	time	midnight
lexicon	time	7 pm
lexicon	time	1115 am
lexicon	period_of_day	morning
lexicon	period_of_day	afternoon
lexicon	period_of_day	evening
lexicon	period_of_day	night
lexicon	period_of_day	early morning
lexicon	period_of_day	late night
lexicon	period_of_day	late afternoon
lexicon	class_type	first class
lexicon	class_type	economy
lexicon	class_type	business class
lexicon	class_type	coach
lexicon	meal	breakfast
lexicon	meal	lunch
lexicon	meal	dinner
lexicon	meal	snacks
lexicon	cost_relative	cheapest
lexicon	cost_relative	lowest
lexicon	cost_relative	least expensive
)";

}  // namespace

const GrammarConfig& default_flight_grammar() {
  static const GrammarConfig grammar = [] {
    std::istringstream in(kFlightGrammar);
    return parse_grammar(in);
  }();
  return grammar;
}

const Ontology& default_flight_ontology() {
  static const Ontology ontology = [] {
    std::istringstream in(kFlightOntology);
    return parse_ontology(in);
  }();
  return ontology;
}

}  // namespace cslot
