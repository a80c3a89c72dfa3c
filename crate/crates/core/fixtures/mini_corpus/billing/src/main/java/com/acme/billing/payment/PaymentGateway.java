package com.acme.billing.payment;

import com.acme.billing.util.Money;

public interface PaymentGateway {
    boolean charge(String accountId, Money amount);

    String name();
}
