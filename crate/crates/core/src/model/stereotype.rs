use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ModelError;

/// Which kinds of model items a stereotype may be attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Applicability {
    pub node: bool,
    pub flow: bool,
    pub external: bool,
}

impl Applicability {
    const NODE: Self = Self { node: true, flow: false, external: false };
    const FLOW: Self = Self { node: false, flow: true, external: false };
    const EXTERNAL: Self = Self { node: false, flow: false, external: true };
    const NODE_EXTERNAL: Self = Self { node: true, flow: false, external: true };
}

macro_rules! stereotypes {
    ($( $variant:ident => $name:literal, $applies:ident, $security:literal; )*) => {
        /// Closed catalog of stereotypes a DFD item can carry.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Stereotype {
            $( $variant, )*
        }

        impl Stereotype {
            pub const ALL: &'static [Stereotype] = &[ $( Stereotype::$variant, )* ];

            pub fn as_str(self) -> &'static str {
                match self {
                    $( Stereotype::$variant => $name, )*
                }
            }

            pub fn applicability(self) -> Applicability {
                match self {
                    $( Stereotype::$variant => Applicability::$applies, )*
                }
            }

            /// Member of one of the security-stereotype subsets.
            pub fn is_security(self) -> bool {
                match self {
                    $( Stereotype::$variant => $security, )*
                }
            }
        }

        impl FromStr for Stereotype {
            type Err = ModelError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim() {
                    $( $name => Ok(Stereotype::$variant), )*
                    other => Err(ModelError::UnknownStereotype(other.to_string())),
                }
            }
        }
    };
}

stereotypes! {
    // services (process or data store)
    AdministrationServer => "administration_server", NODE, false;
    ConfigurationServer => "configuration_server", NODE, false;
    Database => "database", NODE, false;
    Gateway => "gateway", NODE, false;
    Infrastructural => "infrastructural", NODE, false;
    Internal => "internal", NODE, false;
    InMemoryAuthentication => "in_memory_authentication", NODE, false;
    InMemoryDatastore => "in_memory_datastore", NODE, false;
    MessageBroker => "message_broker", NODE, false;
    SearchEngine => "search_engine", NODE, false;
    ServiceDiscovery => "service_discovery", NODE, false;
    WebApplication => "web_application", NODE, false;
    WebServer => "web_server", NODE, false;
    AuthenticationScopeAll => "authentication_scope_all", NODE, true;
    AuthorizationServer => "authorization_server", NODE, true;
    BasicAuthentication => "basic_authentication", NODE, true;
    CsrfDisabled => "csrf_disabled", NODE, true;
    CircuitBreaker => "circuit_breaker", NODE, true;
    Encryption => "encryption", NODE, true;
    LoadBalancer => "load_balancer", NODE, true;
    LocalLogging => "local_logging", NODE, true;
    LoggingServer => "logging_server", NODE_EXTERNAL, true;
    MetricsServer => "metrics_server", NODE, true;
    MonitoringDashboard => "monitoring_dashboard", NODE, true;
    MonitoringServer => "monitoring_server", NODE, true;
    PlaintextCredentials => "plaintext_credentials", NODE_EXTERNAL, true;
    PreAuthorizedEndpoints => "pre_authorized_endpoints", NODE, true;
    ResourceServer => "resource_server", NODE, true;
    SslEnabled => "ssl_enabled", NODE, true;
    TokenServer => "token_server", NODE, true;
    TracingServer => "tracing_server", NODE, true;
    // information flows
    FeignConnection => "feign_connection", FLOW, false;
    Jdbc => "jdbc", FLOW, false;
    MessageProducerKafka => "message_producer_kafka", FLOW, false;
    MessageProducerRabbitmq => "message_producer_rabbitmq", FLOW, false;
    MessageConsumerKafka => "message_consumer_kafka", FLOW, false;
    MessageConsumerRabbitmq => "message_consumer_rabbitmq", FLOW, false;
    RestfulHttp => "restful_http", FLOW, false;
    AuthProvider => "auth_provider", FLOW, true;
    AuthenticatedRequest => "authenticated_request", FLOW, true;
    CircuitBreakerLink => "circuit_breaker_link", FLOW, true;
    LoadBalancedLink => "load_balanced_link", FLOW, true;
    PlaintextAuthentication => "plaintext_authentication", FLOW, true;
    PlaintextCredentialsLink => "plaintext_credentials_link", FLOW, true;
    // external entities
    ExternalDatabase => "external_database", EXTERNAL, false;
    ExternalWebsite => "external_website", EXTERNAL, false;
    GithubRepository => "github_repository", EXTERNAL, false;
    MailServer => "mail_server", EXTERNAL, false;
    User => "user", EXTERNAL, false;
    Entrypoint => "entrypoint", EXTERNAL, true;
    Exitpoint => "exitpoint", EXTERNAL, true;
    Tokenstore => "tokenstore", EXTERNAL, true;
}

impl Stereotype {
    /// Stereotypes marking an off-the-shelf supporting component.
    pub fn is_infrastructural_family(self) -> bool {
        matches!(
            self,
            Stereotype::Gateway
                | Stereotype::ConfigurationServer
                | Stereotype::ServiceDiscovery
                | Stereotype::MessageBroker
                | Stereotype::MonitoringServer
                | Stereotype::MonitoringDashboard
                | Stereotype::TracingServer
                | Stereotype::LoggingServer
                | Stereotype::MetricsServer
                | Stereotype::AdministrationServer
                | Stereotype::WebServer
                | Stereotype::SearchEngine
                | Stereotype::Infrastructural
        )
    }
}

impl fmt::Display for Stereotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Stereotype {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Stereotype {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
