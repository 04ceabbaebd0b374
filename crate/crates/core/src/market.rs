//! Resource market: negotiation, template-matched subscription with weighted
//! Euclidean ranking over a provider catalog, and instance lifecycle.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    PrincipalId, ResourceInstanceProperties, ResourceTemplate, TimeInterval, TimeMs,
};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EnvLabel(pub String);

impl EnvLabel {
    pub fn service_container() -> Self {
        EnvLabel("service-container".into())
    }
    pub fn database() -> Self {
        EnvLabel("database".into())
    }
}

impl fmt::Display for EnvLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A cataloged configuration a provider can deliver, e.g. small/large/extra-large.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResourceOffer {
    pub offer_id: String,
    pub label: String,
    /// Capacity vector; the weights field of the template is unused here.
    pub capacity: ResourceTemplate,
    pub stock: u32,
    pub price_per_hour: f64,
    /// Environment labels installed in advance by the provider. Non-empty
    /// offers skip the configure step.
    #[serde(default)]
    pub preinstalled: BTreeSet<EnvLabel>,
}

/// Terms agreed between subscriber and provider before any subscription.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Agreement {
    pub agreement_id: String,
    pub subscriber: PrincipalId,
    pub provider: PrincipalId,
    pub rental_period: TimeInterval,
    pub purpose: String,
    /// Management actions the subscriber may perform.
    pub authority: Vec<String>,
    pub expense: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceState {
    Delivered,
    Configured,
    Active,
    Released,
}

impl fmt::Display for InstanceState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceState::Delivered => write!(f, "delivered"),
            InstanceState::Configured => write!(f, "configured"),
            InstanceState::Active => write!(f, "active"),
            InstanceState::Released => write!(f, "released"),
        }
    }
}

/// A delivered resource instance and its configured environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResourceInstance {
    /// Endpoint string, doubles as the instance id.
    pub instance_id: String,
    pub offer_id: String,
    pub agreement_id: String,
    pub properties: ResourceInstanceProperties,
    pub configured_env: BTreeSet<EnvLabel>,
    pub state: InstanceState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReleaseReason {
    Subscriber,
    Expiry,
    ScaleDown,
}

impl fmt::Display for ReleaseReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReleaseReason::Subscriber => write!(f, "subscriber"),
            ReleaseReason::Expiry => write!(f, "expiry"),
            ReleaseReason::ScaleDown => write!(f, "scale-down"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReleaseConfirmation {
    pub instance_id: String,
    pub reason: ReleaseReason,
}

/// One ranked catalog candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct OfferMatch {
    pub offer_id: String,
    pub distance: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("empty catalog")]
    EmptyCatalog,
    #[error("no offer satisfies the symbolic constraints (os/db)")]
    NoMatch,
    #[error("template invalid: {0}")]
    BadTemplate(String),
}

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("unknown provider: {0}")]
    ProviderUnknown(PrincipalId),
    #[error("rental period is empty")]
    EmptyRentalPeriod,
    #[error("agreement {0} not found")]
    AgreementUnknown(String),
    #[error("agreement {agreement_id} expired at {at}ms (now {now}ms)")]
    AgreementExpired {
        agreement_id: String,
        at: TimeMs,
        now: TimeMs,
    },
    #[error("subscriber {subscriber} does not match agreement {agreement_id}")]
    SubscriberMismatch {
        subscriber: PrincipalId,
        agreement_id: String,
    },
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error("all matching offers are out of stock")]
    OutOfStock,
    #[error("instance {0} not found")]
    InstanceUnknown(String),
    #[error("instance {0} already released")]
    AlreadyReleased(String),
    #[error("instance {instance_id} in state {state}, expected {expected}")]
    WrongState {
        instance_id: String,
        state: InstanceState,
        expected: InstanceState,
    },
}

/// Ranks catalog offers against a template.
///
/// Offers failing a non-wildcard os/db constraint are excluded. Remaining
/// offers are ordered ascending by the weighted Euclidean distance over the
/// numeric dimensions, each normalized by its min-max range across the
/// filtered catalog (range 0 counts as 1 so the term stays defined). Ties
/// break by lower price, then offer id.
pub fn match_offer(
    template: &ResourceTemplate,
    catalog: &[ResourceOffer],
) -> Result<Vec<OfferMatch>, MatchError> {
    if catalog.is_empty() {
        return Err(MatchError::EmptyCatalog);
    }
    if !template.dimensions_positive() {
        return Err(MatchError::BadTemplate("numeric dimensions must be > 0".into()));
    }
    if !template.weights.all_non_negative() || !template.weights.any_positive() {
        return Err(MatchError::BadTemplate(
            "weights must be non-negative with at least one positive".into(),
        ));
    }

    let filtered: Vec<&ResourceOffer> = catalog
        .iter()
        .filter(|offer| {
            let os_label = match &offer.capacity.os {
                crate::model::SymbolicReq::Exact(s) => s.as_str(),
                crate::model::SymbolicReq::Any => "",
            };
            let db_label = match &offer.capacity.db {
                crate::model::SymbolicReq::Exact(s) => s.as_str(),
                crate::model::SymbolicReq::Any => "",
            };
            template.os.accepts(os_label) && template.db.accepts(db_label)
        })
        .collect();
    if filtered.is_empty() {
        return Err(MatchError::NoMatch);
    }

    let dims = |t: &ResourceTemplate| -> [f64; 4] {
        [t.cpu_ghz, t.cpu_cores as f64, t.memory_gb, t.disk_gb]
    };
    let mut ranges = [1.0f64; 4];
    for d in 0..4 {
        let lo = filtered.iter().map(|o| dims(&o.capacity)[d]).fold(f64::INFINITY, f64::min);
        let hi = filtered.iter().map(|o| dims(&o.capacity)[d]).fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        ranges[d] = if span > 0.0 { span } else { 1.0 };
    }

    let weights = template.weights.as_array();
    let wanted = dims(template);
    let mut ranked: Vec<(&ResourceOffer, f64)> = filtered
        .into_iter()
        .map(|offer| {
            let have = dims(&offer.capacity);
            let sum: f64 = (0..4)
                .map(|d| {
                    let delta = (wanted[d] - have[d]) / ranges[d];
                    weights[d] * delta * delta
                })
                .sum();
            (offer, sum.sqrt())
        })
        .collect();

    ranked.sort_by(|(a, da), (b, db)| {
        da.partial_cmp(db)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| {
                a.price_per_hour
                    .partial_cmp(&b.price_per_hour)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .then_with(|| a.offer_id.cmp(&b.offer_id))
    });

    Ok(ranked
        .into_iter()
        .map(|(o, distance)| OfferMatch {
            offer_id: o.offer_id.clone(),
            distance,
        })
        .collect())
}

/// Catalog, agreements, and live instances form one logical ledger.
#[derive(Debug, Default)]
pub struct ResourceMarket {
    providers: BTreeSet<PrincipalId>,
    catalog: Vec<ResourceOffer>,
    agreements: BTreeMap<String, Agreement>,
    instances: BTreeMap<String, ResourceInstance>,
    next_agreement: u64,
    next_endpoint: u64,
}

impl ResourceMarket {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_provider(&mut self, provider: PrincipalId) {
        self.providers.insert(provider);
    }

    pub fn add_offer(&mut self, offer: ResourceOffer) {
        self.catalog.push(offer);
    }

    pub fn catalog(&self) -> &[ResourceOffer] {
        &self.catalog
    }

    pub fn offer(&self, offer_id: &str) -> Option<&ResourceOffer> {
        self.catalog.iter().find(|o| o.offer_id == offer_id)
    }

    pub fn instance(&self, instance_id: &str) -> Option<&ResourceInstance> {
        self.instances.get(instance_id)
    }

    pub fn instances(&self) -> impl Iterator<Item = &ResourceInstance> {
        self.instances.values()
    }

    pub fn agreement(&self, id: &str) -> Option<&Agreement> {
        self.agreements.get(id)
    }

    pub fn negotiate(
        &mut self,
        subscriber: &PrincipalId,
        provider: &PrincipalId,
        rental_period: TimeInterval,
        purpose: impl Into<String>,
    ) -> Result<Agreement, MarketError> {
        if !self.providers.contains(provider) {
            return Err(MarketError::ProviderUnknown(provider.clone()));
        }
        if rental_period.is_empty() {
            return Err(MarketError::EmptyRentalPeriod);
        }
        self.next_agreement += 1;
        let agreement = Agreement {
            agreement_id: format!("agr-{:04}", self.next_agreement),
            subscriber: subscriber.clone(),
            provider: provider.clone(),
            rental_period,
            purpose: purpose.into(),
            authority: vec!["start".into(), "stop".into(), "resume".into(), "monitor".into()],
            expense: "per-hour by delivered capacity".into(),
        };
        self.agreements
            .insert(agreement.agreement_id.clone(), agreement.clone());
        Ok(agreement)
    }

    /// Instantiates the best in-stock offer for the template. Walks the
    /// ranked list past out-of-stock offers.
    pub fn subscribe(
        &mut self,
        subscriber: &PrincipalId,
        template: &ResourceTemplate,
        agreement_id: &str,
        now: TimeMs,
    ) -> Result<ResourceInstance, MarketError> {
        let agreement = self
            .agreements
            .get(agreement_id)
            .ok_or_else(|| MarketError::AgreementUnknown(agreement_id.to_string()))?
            .clone();
        if &agreement.subscriber != subscriber {
            return Err(MarketError::SubscriberMismatch {
                subscriber: subscriber.clone(),
                agreement_id: agreement_id.to_string(),
            });
        }
        if !agreement.rental_period.contains(now) {
            return Err(MarketError::AgreementExpired {
                agreement_id: agreement_id.to_string(),
                at: agreement.rental_period.end(),
                now,
            });
        }

        let ranked = match_offer(template, &self.catalog)?;
        let chosen = ranked
            .iter()
            .find(|m| self.offer(&m.offer_id).map(|o| o.stock > 0).unwrap_or(false))
            .ok_or(MarketError::OutOfStock)?
            .clone();

        let offer = self
            .catalog
            .iter_mut()
            .find(|o| o.offer_id == chosen.offer_id)
            .expect("ranked offer exists");
        offer.stock -= 1;
        let offer = offer.clone();

        self.next_endpoint += 1;
        // hosts are identified by lab-style addresses, starting at .99
        let instance_id = format!("192.168.10.{}", 98 + self.next_endpoint);

        let availability = TimeInterval::new(
            now.max(agreement.rental_period.start()),
            agreement.rental_period.end(),
        );
        let preconfigured = !offer.preinstalled.is_empty();
        let instance = ResourceInstance {
            instance_id: instance_id.clone(),
            offer_id: offer.offer_id.clone(),
            agreement_id: agreement_id.to_string(),
            properties: ResourceInstanceProperties {
                identifier: instance_id.clone(),
                ownership: agreement.provider.clone(),
                usufruct: subscriber.clone(),
                management: subscriber.clone(),
                availability,
                connectivity: true,
                capacity: offer.capacity.clone(),
                price_per_hour: offer.price_per_hour,
            },
            configured_env: offer.preinstalled.clone(),
            state: if preconfigured {
                InstanceState::Configured
            } else {
                InstanceState::Delivered
            },
        };
        self.instances.insert(instance_id, instance.clone());
        Ok(instance)
    }

    /// Batch form of subscribe; either all instances are delivered or none.
    pub fn subscribe_many(
        &mut self,
        subscriber: &PrincipalId,
        template: &ResourceTemplate,
        agreement_id: &str,
        count: usize,
        now: TimeMs,
    ) -> Result<Vec<ResourceInstance>, MarketError> {
        let mut delivered = Vec::with_capacity(count);
        for _ in 0..count {
            match self.subscribe(subscriber, template, agreement_id, now) {
                Ok(instance) => delivered.push(instance),
                Err(e) => {
                    for inst in &delivered {
                        let _ = self.unsubscribe(&inst.instance_id, ReleaseReason::Subscriber);
                    }
                    return Err(e);
                }
            }
        }
        Ok(delivered)
    }

    pub fn unsubscribe(
        &mut self,
        instance_id: &str,
        reason: ReleaseReason,
    ) -> Result<ReleaseConfirmation, MarketError> {
        let instance = self
            .instances
            .get_mut(instance_id)
            .ok_or_else(|| MarketError::InstanceUnknown(instance_id.to_string()))?;
        if instance.state == InstanceState::Released {
            return Err(MarketError::AlreadyReleased(instance_id.to_string()));
        }
        instance.state = InstanceState::Released;
        let offer_id = instance.offer_id.clone();
        if let Some(offer) = self.catalog.iter_mut().find(|o| o.offer_id == offer_id) {
            offer.stock += 1;
        }
        Ok(ReleaseConfirmation {
            instance_id: instance_id.to_string(),
            reason,
        })
    }

    pub fn configure(
        &mut self,
        instance_id: &str,
        env: &BTreeSet<EnvLabel>,
    ) -> Result<&ResourceInstance, MarketError> {
        let instance = self
            .instances
            .get_mut(instance_id)
            .ok_or_else(|| MarketError::InstanceUnknown(instance_id.to_string()))?;
        if instance.state != InstanceState::Delivered {
            return Err(MarketError::WrongState {
                instance_id: instance_id.to_string(),
                state: instance.state,
                expected: InstanceState::Delivered,
            });
        }
        instance.configured_env.extend(env.iter().cloned());
        instance.state = InstanceState::Configured;
        Ok(instance)
    }

    /// Marks a configured instance as actively hosting a service.
    pub fn activate(&mut self, instance_id: &str) -> Result<(), MarketError> {
        let instance = self
            .instances
            .get_mut(instance_id)
            .ok_or_else(|| MarketError::InstanceUnknown(instance_id.to_string()))?;
        match instance.state {
            InstanceState::Configured | InstanceState::Active => {
                instance.state = InstanceState::Active;
                Ok(())
            }
            state => Err(MarketError::WrongState {
                instance_id: instance_id.to_string(),
                state,
                expected: InstanceState::Configured,
            }),
        }
    }

    /// Stock plus live (non-released) instances, per offer. Constant across
    /// any subscribe/unsubscribe sequence.
    pub fn stock_ledger(&self) -> BTreeMap<String, u32> {
        let mut ledger: BTreeMap<String, u32> = self
            .catalog
            .iter()
            .map(|o| (o.offer_id.clone(), o.stock))
            .collect();
        for inst in self.instances.values() {
            if inst.state != InstanceState::Released {
                *ledger.entry(inst.offer_id.clone()).or_insert(0) += 1;
            }
        }
        ledger
    }
}
