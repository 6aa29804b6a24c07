//! Scenario prompt library.
//!
//! A scenario bundles every prompt an agent needs for one dataset family:
//! memory reflection, destination selection (with an optional second
//! "request" call that writes the interaction), and source/destination node
//! generation. Two concrete scenarios ship (a bipartite product-review
//! platform and a non-bipartite social platform); [`Scenario::generic`]
//! builds the same shapes from a few dataset descriptors.

use serde::{Deserialize, Serialize};

use crate::parse::FieldKind;
use crate::template::PromptTemplate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Sephora,
    Weibo,
    Generic,
}

/// Free-text descriptors for [`Scenario::generic`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioDescriptors {
    pub platform: String,
    pub source_noun: String,
    pub destination_noun: String,
    pub interaction_noun: String,
    pub label_description: String,
    pub time_format: String,
}

impl Default for ScenarioDescriptors {
    fn default() -> Self {
        Self {
            platform: "online platform".into(),
            source_noun: "user".into(),
            destination_noun: "item".into(),
            interaction_noun: "interaction".into(),
            label_description: "The category of the interaction".into(),
            time_format: "the same numeric unit as your history".into(),
        }
    }
}

/// Where the interaction fields live in the model replies.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplySchema {
    /// Keys read from the selection reply.
    pub select_keys: Vec<(&'static str, FieldKind)>,
    /// Keys read from the request reply, when the scenario uses two calls.
    pub request_keys: Vec<(&'static str, FieldKind)>,
    pub destination_key: &'static str,
    pub time_key: &'static str,
    pub label_key: &'static str,
    /// Joined with newlines to form the edge text.
    pub text_keys: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub id: String,
    pub bipartite: bool,
    /// Slots: `node_info`, `node_memory`.
    pub reflection: PromptTemplate,
    /// Slots: `node_info`, `node_memory`, `node_items`, `interaction_example`.
    pub select: PromptTemplate,
    /// Slots: `node_info`, `node_memory`, `item_info`, `item_memory`, `interaction_example`.
    pub request: Option<PromptTemplate>,
    /// Slot: `recent_node_info`.
    pub source_generation: PromptTemplate,
    /// Slot: `recent_node_info`.
    pub destination_generation: PromptTemplate,
    pub reply: ReplySchema,
}

const REFLECT_SLOTS: &[&str] = &["node_info", "node_memory"];
const SELECT_SLOTS: &[&str] = &["node_info", "node_memory", "node_items", "interaction_example"];
const REQUEST_SLOTS: &[&str] = &["node_info", "node_memory", "item_info", "item_memory", "interaction_example"];
const GEN_SLOTS: &[&str] = &["recent_node_info"];

const SEPHORA_REFLECTION: &str = "As a customer of the Sephora online shopping platform, you can review Sephora products based on the provided information and your own situation:
{node_info}

Here are your previous review history:
{node_memory}

Now, based on your personal description and past review history, progressively refine your memory into a concise version, ensuring it reflects your personal preferences.

Respond.";

const SEPHORA_SELECT: &str = r#"You are a customer of the Sephora online shopping platform, you can review Sephora products based on the provided information and your own situation:
{node_info}

Here's your past reviews history:
{node_memory}

Here's the candidate products you can review:
{node_items}

Here's the example of how you should proceed with your review:
{interaction_example}

You should review ONE product. You can review the chosen product with detailed text and rate it.
Additionally, you should predict how many positive/negative feedbacks will be received for this review.
The predicted time of the review should be firmly related to the time in your past reviews history (relatively later than or equal to them).
Respond using the following detailed JSON format for ONE product:

{
  "review": {
    item_id: (str, "The ID of the product you want to review. Be sure to be one of the Item IDs mentioned above!"),
    timestamp: (str, "The time of review (yyyy-mm-dd)"),
    rating: (int, "The overall rating given to the product (From 1 to 5)"),
    review_title: (str, "The title of your review"),
    review_text: (str, "Your detailed review text"),
    total_neg_feedback_count: (int, "Number of negative feedback received for this review"),
    total_pos_feedback_count: (int, "Number of positive feedback received for this review")
  }
}

Respond."#;

const SEPHORA_AUTHOR_GEN: &str = r#"Now we have a Sephora dataset, which records Sephora users' reviews on several Sephora products.
Here's information of the recent active Sephora author nodes:
{recent_node_info}

You are expected to generate ONE new Sephora author node for the Sephora dataset, and ensure that the generated new node is somewhat different from the existing nodes.
Respond using the following detailed JSON format for ONE new Sephora author:

{
  "sephora_author": {
    node_id: (str, "The ID of the generated author (Format: G + 5-digit random number)"),
    node_type: sephora_author,
    skin_tone: (str, "The skin tone of the generated author (e.g. light, fair, mediumTan, tan, olive, etc.)"),
    eye_color: (str, "The eye color of the generated author (e.g. brown, green, hazel, blue, etc.)"),
    skin_type: (str, "The skin type of the generated author (e.g. oily, dry, combination, normal, etc.)"),
    hair_color: (str, "The hair color of the generated author (e.g. brown, black, blonde, auburn, etc.)"),
    total_neg_feedback_count: (int, "The number of total negative feedback received from other authors of the generated author"),
    total_pos_feedback_count: (int, "The number of total active feedback received from other authors of the generated author"),
  }
}

Respond."#;

const SEPHORA_PRODUCT_GEN: &str = r#"Now we have a Sephora dataset, which records Sephora users' reviews on several Sephora products.
Here's information of the recent active Sephora product nodes:
{recent_node_info}

You are expected to generate ONE new Sephora product node for the Sephora dataset, and ensure that the generated new node is somewhat different from the existing nodes.
Respond using the following detailed JSON format for ONE new Sephora product:

{
  "sephora_product": {
    node_id: (str, "The ID of the generated product (Format: G + 5-digit random number)"),
    node_type: sephora_product,
    product_name: (str, "The name of the generated product"),
    brand_name: (str, "The name of the brand of the generated product"),
    primary_category: (str, "The primary category of the generated product"),
    secondary_category: (str, "The secondary category of the generated product"),
    ingredients: (str, "The ingredients of the generated product"),
    loves_count: (int, "The loves count from the users of the generated product"),
    rating: (float, "The avg rating from the users of the generated product"),
    reviews: (int, "The number reviews from the users of the generated product"),
    size: (str, "The size the generated product"),
    price_usd: (float, "The price the generated product"),
  }
}

Respond."#;

const WEIBO_REFLECTION: &str = "As a Weibo user, you can search for other Weibo users who may interact with you on the online social media Weibo platform:
{node_info}

Here are your previous interactions history:
{node_memory}

Now, based on your personal description and past interactions history, progressively refine your memory into a concise version, ensuring it reflects your personal preferences.

Respond.";

const WEIBO_SELECT: &str = r#"As a Weibo user, you need to search for other Weibo users who may interact with you on the online social media Weibo platform:
{node_info}

Here are the potential Weibo users you can choose from:
{node_items}

Here is your previous interaction history:
{node_memory}

Here's the example of how to interact with others:
{interaction_example}

You should select ONE destination user, you're tend to select the one you have interacted with before. Respond using the following detailed JSON format:

{
  "interact": {
    item_id: (str, "The ID of the destination user. Be sure to be one of the Item IDs mentioned above!")
  }
}

Respond."#;

const WEIBO_REQUEST: &str = r#"As a Weibo user, you need to search for other Weibo users who may interact with you on the online social media Weibo platform:
{node_info}

Here is your previous interaction history:
{node_memory}

The chosen destination Weibo user who may interact with you is:
{item_info}

Here's the interaction history of this chosen Weibo user:
{item_memory}

Here's the example of how to interact with others:
{interaction_example}

You should select ONE destination user. You should post texts as the source user and the selected destination user should interact with you in detailed text.
Additionally, you should label the type of the interaction (comment or repost).
The predicted time of the interaction should be firmly related to the time in your previous interaction history (relatively later than or equal to them).
Respond using the following detailed JSON format:

{
  "interact": {
    item_id: (str, "The ID of the destination user"),
    timestamp: (str, "The time of the interaction (yyyy-mm-dd hh-mm-ss)"),
    label: (str, "The type of interaction (TWO TYPE: 1.comment, 2.repost)"),
    src_text: (str, "The text from the source user"),
    dst_text: (str, "The text from the destination user")
  }
}

Respond."#;

const WEIBO_USER_GEN: &str = r#"Now we have a weibo dataset, which records the interaction history between Weibo users.
Here's information of the recent active user nodes:
{recent_node_info}

You are expected to generate ONE new user node for the weibo dataset, and ensure that the generated new node is somewhat different from the existing nodes.
Respond using the following detailed JSON format for ONE new user:

{
  "weibo_user": {
    node_id: (str, "The ID of the generated user (Format: G + 5-digit random number)"),
    node_type: weibo_user,
    user_name: (str, "The name of the generated user"),
    user_source: (str, "The source(IP/location/device) of the generated user"),
    user_gender: (str, "The gender of the generated user"),
    user_location: (str, "The location of the generated user"),
    user_followers: (int, "The number of the followers of the generated user"),
    user_friends: (int, "The number of the followees of the generated user"),
    user_description: (str, "The description of the generated user"),
  }
}

Respond."#;

impl Scenario {
    pub fn from_kind(kind: ScenarioKind, descriptors: &ScenarioDescriptors) -> Self {
        match kind {
            ScenarioKind::Sephora => Self::sephora(),
            ScenarioKind::Weibo => Self::weibo(),
            ScenarioKind::Generic => Self::generic(descriptors, true),
        }
    }

    /// Bipartite review platform: authors review products in a single call.
    pub fn sephora() -> Self {
        Self {
            kind: ScenarioKind::Sephora,
            id: "sephora".into(),
            bipartite: true,
            reflection: PromptTemplate::new("sephora/reflection", SEPHORA_REFLECTION, REFLECT_SLOTS),
            select: PromptTemplate::new("sephora/interaction", SEPHORA_SELECT, SELECT_SLOTS),
            request: None,
            source_generation: PromptTemplate::new("sephora/author_generation", SEPHORA_AUTHOR_GEN, GEN_SLOTS),
            destination_generation: PromptTemplate::new("sephora/product_generation", SEPHORA_PRODUCT_GEN, GEN_SLOTS),
            reply: ReplySchema {
                select_keys: vec![
                    ("item_id", FieldKind::Str),
                    ("timestamp", FieldKind::Str),
                    ("rating", FieldKind::Int),
                    ("review_title", FieldKind::Str),
                    ("review_text", FieldKind::Str),
                ],
                request_keys: vec![],
                destination_key: "item_id",
                time_key: "timestamp",
                label_key: "rating",
                text_keys: vec!["review_title", "review_text"],
            },
        }
    }

    /// Non-bipartite social platform: pick a user, then write the exchange.
    pub fn weibo() -> Self {
        Self {
            kind: ScenarioKind::Weibo,
            id: "weibo".into(),
            bipartite: false,
            reflection: PromptTemplate::new("weibo/reflection", WEIBO_REFLECTION, REFLECT_SLOTS),
            select: PromptTemplate::new("weibo/action", WEIBO_SELECT, SELECT_SLOTS),
            request: Some(PromptTemplate::new("weibo/request", WEIBO_REQUEST, REQUEST_SLOTS)),
            source_generation: PromptTemplate::new("weibo/user_generation", WEIBO_USER_GEN, GEN_SLOTS),
            destination_generation: PromptTemplate::new("weibo/user_generation", WEIBO_USER_GEN, GEN_SLOTS),
            reply: ReplySchema {
                select_keys: vec![("item_id", FieldKind::Str)],
                request_keys: vec![
                    ("timestamp", FieldKind::Str),
                    ("label", FieldKind::Str),
                    ("src_text", FieldKind::Str),
                    ("dst_text", FieldKind::Str),
                ],
                destination_key: "item_id",
                time_key: "timestamp",
                label_key: "label",
                text_keys: vec!["src_text", "dst_text"],
            },
        }
    }

    /// Same prompt shapes, parameterized by dataset descriptors.
    pub fn generic(d: &ScenarioDescriptors, bipartite: bool) -> Self {
        let reflection = format!(
            "As a {src} on the {platform}, you interact with {dst}s based on the provided information and your own situation:
{{node_info}}

Here is your previous {inter} history:
{{node_memory}}

Now, based on your personal description and past {inter} history, progressively refine your memory into a concise version, ensuring it reflects your personal preferences.

Respond.",
            src = d.source_noun,
            dst = d.destination_noun,
            platform = d.platform,
            inter = d.interaction_noun,
        );
        let select = format!(
            r#"As a {src} on the {platform}, you interact with {dst}s based on the provided information and your own situation:
{{node_info}}

Here is your previous {inter} history:
{{node_memory}}

Here are the candidate {dst}s you can choose from:
{{node_items}}

Here's the example of how you should proceed with your {inter}:
{{interaction_example}}

You should choose ONE {dst} and write the {inter} in detailed text.
The predicted time of the {inter} should be firmly related to the time in your previous history (relatively later than or equal to them), expressed in {time}.
Respond using the following detailed JSON format:

{{
  "interaction": {{
    item_id: (str, "The ID of the chosen {dst}. Be sure to be one of the Item IDs mentioned above!"),
    timestamp: (str, "The time of the {inter}"),
    label: (str, "{label}"),
    text: (str, "The detailed text of the {inter}")
  }}
}}

Respond."#,
            src = d.source_noun,
            dst = d.destination_noun,
            platform = d.platform,
            inter = d.interaction_noun,
            time = d.time_format,
            label = d.label_description,
        );
        let node_gen = |noun: &str| {
            format!(
                r#"Now we have a dataset from the {platform}, which records {inter}s between {src}s and {dst}s.
Here's information of the recent active {noun} nodes:
{{recent_node_info}}

You are expected to generate ONE new {noun} node for the dataset, and ensure that the generated new node is somewhat different from the existing nodes.
Respond using the following detailed JSON format for ONE new {noun}:

{{
  "node": {{
    node_id: (str, "The ID of the generated {noun} (Format: G + 5-digit random number)"),
    description: (str, "The full textual profile of the generated {noun}")
  }}
}}

Respond."#,
                platform = d.platform,
                inter = d.interaction_noun,
                src = d.source_noun,
                dst = d.destination_noun,
            )
        };
        Self {
            kind: ScenarioKind::Generic,
            id: format!("generic/{}", d.platform),
            bipartite,
            reflection: PromptTemplate::new("generic/reflection", reflection, REFLECT_SLOTS),
            select: PromptTemplate::new("generic/interaction", select, SELECT_SLOTS),
            request: None,
            source_generation: PromptTemplate::new("generic/source_generation", node_gen(&d.source_noun), GEN_SLOTS),
            destination_generation: PromptTemplate::new(
                "generic/destination_generation",
                node_gen(&d.destination_noun),
                GEN_SLOTS,
            ),
            reply: ReplySchema {
                select_keys: vec![
                    ("item_id", FieldKind::Str),
                    ("timestamp", FieldKind::Str),
                    ("label", FieldKind::Str),
                    ("text", FieldKind::Str),
                ],
                request_keys: vec![],
                destination_key: "item_id",
                time_key: "timestamp",
                label_key: "label",
                text_keys: vec!["text"],
            },
        }
    }

    pub fn templates(&self) -> Vec<&PromptTemplate> {
        let mut v = vec![&self.reflection, &self.select, &self.source_generation, &self.destination_generation];
        if let Some(r) = &self.request {
            v.push(r);
        }
        v
    }
}
